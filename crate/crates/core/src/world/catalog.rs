//! Static affordances of every object type the simulator can instantiate.

use std::collections::BTreeMap;

use super::props::{PropValue, Property};

/// What a receptacle accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Accepts {
    Anything,
    /// Only sliced bread (toasters).
    BreadSlices,
    /// Only mugs and cups (coffee machines).
    Drinkware,
    /// Only pots and pans (stove burners).
    Cookware,
    /// Nothing can be placed (faucets, plants).
    Nothing,
}

#[derive(Debug, Clone, Copy)]
pub struct TypeInfo {
    pub name: &'static str,
    pub fixture: bool,
    pub receptacle: bool,
    pub capacity: usize,
    pub openable: bool,
    pub toggleable: bool,
    pub pickupable: bool,
    pub sliceable: bool,
    pub fillable: bool,
    pub dirtyable: bool,
    pub cookable: bool,
    pub boilable: bool,
    pub holds_coffee: bool,
    /// Surface height of a fixture in centimetres.
    pub elevation_cm: i64,
    pub accepts: Accepts,
}

const BASE: TypeInfo = TypeInfo {
    name: "",
    fixture: false,
    receptacle: false,
    capacity: 0,
    openable: false,
    toggleable: false,
    pickupable: false,
    sliceable: false,
    fillable: false,
    dirtyable: false,
    cookable: false,
    boilable: false,
    holds_coffee: false,
    elevation_cm: 0,
    accepts: Accepts::Nothing,
};

const fn fixture(name: &'static str, capacity: usize, elevation_cm: i64) -> TypeInfo {
    TypeInfo {
        name,
        fixture: true,
        receptacle: capacity > 0,
        capacity,
        elevation_cm,
        accepts: if capacity > 0 { Accepts::Anything } else { Accepts::Nothing },
        ..BASE
    }
}

const fn item(name: &'static str) -> TypeInfo {
    TypeInfo {
        name,
        pickupable: true,
        ..BASE
    }
}

pub const CATALOG: &[TypeInfo] = &[
    // fixtures
    fixture("CounterTop", 8, 90),
    fixture("Sink", 3, 85),
    TypeInfo { toggleable: true, ..fixture("Faucet", 0, 145) },
    TypeInfo { toggleable: true, accepts: Accepts::Cookware, ..fixture("StoveBurner", 1, 92) },
    TypeInfo { openable: true, ..fixture("Fridge", 6, 100) },
    TypeInfo { openable: true, ..fixture("Cabinet", 4, 50) },
    TypeInfo { openable: true, ..fixture("Drawer", 3, 60) },
    TypeInfo { openable: true, toggleable: true, ..fixture("Microwave", 2, 140) },
    TypeInfo { toggleable: true, accepts: Accepts::BreadSlices, ..fixture("Toaster", 2, 105) },
    TypeInfo { toggleable: true, accepts: Accepts::Drinkware, ..fixture("CoffeeMachine", 1, 105) },
    fixture("DiningTable", 8, 80),
    fixture("Shelf", 4, 120),
    fixture("Bathtub", 4, 40),
    fixture("SideTable", 4, 60),
    fixture("Sofa", 4, 40),
    fixture("Bed", 4, 50),
    fixture("Desk", 6, 80),
    fixture("CoffeeTable", 6, 40),
    fixture("Dresser", 4, 95),
    TypeInfo { fillable: true, ..fixture("HousePlant", 0, 50) },
    // food
    TypeInfo { sliceable: true, ..item("Bread") },
    TypeInfo { cookable: true, ..item("BreadSliced") },
    TypeInfo { sliceable: true, ..item("Tomato") },
    item("TomatoSliced"),
    TypeInfo { sliceable: true, ..item("Lettuce") },
    item("LettuceSliced"),
    TypeInfo { sliceable: true, cookable: true, boilable: true, ..item("Potato") },
    TypeInfo { cookable: true, boilable: true, ..item("PotatoSliced") },
    TypeInfo { sliceable: true, ..item("Apple") },
    item("AppleSliced"),
    // utensils and dishware
    TypeInfo { dirtyable: true, ..item("Knife") },
    TypeInfo { dirtyable: true, ..item("ButterKnife") },
    TypeInfo { dirtyable: true, ..item("Fork") },
    TypeInfo { dirtyable: true, ..item("Spoon") },
    TypeInfo { dirtyable: true, receptacle: true, capacity: 4, accepts: Accepts::Anything, ..item("Plate") },
    TypeInfo { dirtyable: true, fillable: true, receptacle: true, capacity: 3, accepts: Accepts::Anything, ..item("Bowl") },
    TypeInfo { dirtyable: true, fillable: true, holds_coffee: true, ..item("Mug") },
    TypeInfo { dirtyable: true, fillable: true, holds_coffee: true, ..item("Cup") },
    TypeInfo { dirtyable: true, fillable: true, receptacle: true, capacity: 2, accepts: Accepts::Anything, ..item("Pot") },
    TypeInfo { dirtyable: true, receptacle: true, capacity: 2, accepts: Accepts::Anything, ..item("Pan") },
    TypeInfo { dirtyable: true, ..item("Cloth") },
    // household items
    item("TissueBox"),
    item("RemoteControl"),
    item("Book"),
    item("Pillow"),
    item("KeyChain"),
    item("Watch"),
    item("Newspaper"),
    item("SoapBar"),
    item("Candle"),
];

pub fn lookup(object_type: &str) -> Option<&'static TypeInfo> {
    CATALOG.iter().find(|t| t.name == object_type)
}

/// The sliced product of a sliceable type, e.g. `Bread` -> `BreadSliced`.
pub fn sliced_type(object_type: &str) -> Option<String> {
    let info = lookup(object_type)?;
    info.sliceable.then(|| format!("{object_type}Sliced"))
}

/// Inverse of [`sliced_type`].
pub fn slice_source(sliced: &str) -> Option<&'static str> {
    let base = sliced.strip_suffix("Sliced")?;
    lookup(base).filter(|t| t.sliceable).map(|t| t.name)
}

pub fn is_knife(object_type: &str) -> bool {
    matches!(object_type, "Knife" | "ButterKnife")
}

/// Properties a fresh instance of `info` carries, before placement.
pub fn initial_properties(info: &TypeInfo) -> BTreeMap<Property, PropValue> {
    let mut props = BTreeMap::new();
    props.insert(Property::ObjectType, PropValue::str(info.name));
    props.insert(Property::Receptacle, PropValue::flag(info.receptacle));
    props.insert(Property::Openable, PropValue::flag(info.openable));
    props.insert(Property::Toggleable, PropValue::flag(info.toggleable));
    props.insert(Property::Pickupable, PropValue::flag(info.pickupable));
    props.insert(Property::Sliceable, PropValue::flag(info.sliceable));
    props.insert(Property::Fillable, PropValue::flag(info.fillable));
    if info.openable {
        props.insert(Property::IsOpen, PropValue::Int(0));
    }
    if info.toggleable {
        props.insert(Property::IsToggled, PropValue::Int(0));
    }
    if info.fillable {
        props.insert(Property::IsFilledWithLiquid, PropValue::Int(0));
    }
    if info.holds_coffee {
        props.insert(Property::IsFilledWithCoffee, PropValue::Int(0));
    }
    if info.dirtyable {
        props.insert(Property::IsDirty, PropValue::Int(0));
    }
    if info.cookable {
        props.insert(Property::IsCooked, PropValue::Int(0));
    }
    if info.boilable {
        props.insert(Property::IsBoiled, PropValue::Int(0));
    }
    if info.fixture {
        props.insert(Property::VisibleHeight, PropValue::Int(info.elevation_cm));
    }
    props
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slice_pairs_are_consistent() {
        for t in CATALOG.iter().filter(|t| t.sliceable) {
            let s = sliced_type(t.name).unwrap();
            assert!(lookup(&s).is_some(), "{s} missing from catalog");
            assert_eq!(slice_source(&s), Some(t.name));
        }
        assert_eq!(sliced_type("Mug"), None);
        assert_eq!(slice_source("Mug"), None);
    }

    #[test]
    fn names_are_unique() {
        let mut names: Vec<_> = CATALOG.iter().map(|t| t.name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), CATALOG.len());
    }
}
