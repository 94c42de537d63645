//! The templated instruction grammar: space-separated motion names and
//! `<Verb> <ObjectType> at <x> <y>` interaction tokens.

use std::fmt;

use crate::sim::{Action, Motion, ObjectSelector, Verb};

#[derive(Debug, Clone, PartialEq)]
pub enum InstructionToken {
    Motion(Motion),
    Interact { verb: Verb, object_type: String, x: f64, y: f64 },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TokenError {
    #[error("unknown token `{0}`")]
    Unknown(String),
    #[error("incomplete interaction after `{0}`")]
    Incomplete(String),
    #[error("bad coordinate `{0}`")]
    Coordinate(String),
}

impl InstructionToken {
    /// Round coordinates the way they are rendered.
    pub fn interact(verb: Verb, object_type: &str, x: f64, y: f64) -> Self {
        let r = |v: f64| (v.clamp(0.0, 1.0) * 100.0).round() / 100.0;
        InstructionToken::Interact {
            verb,
            object_type: object_type.to_string(),
            x: r(x),
            y: r(y),
        }
    }

    pub fn to_action(&self) -> Action {
        match self {
            InstructionToken::Motion(m) => Action::Motion { motion: *m },
            InstructionToken::Interact { verb, x, y, .. } => Action::Interact {
                verb: *verb,
                target: ObjectSelector::Coordinate(*x, *y),
            },
        }
    }
}

impl fmt::Display for InstructionToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InstructionToken::Motion(m) => f.write_str(m.name()),
            InstructionToken::Interact { verb, object_type, x, y } => {
                write!(f, "{} {object_type} at {x:.2} {y:.2}", verb.name())
            }
        }
    }
}

pub fn render(tokens: &[InstructionToken]) -> String {
    tokens.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" ")
}

fn coordinate(word: Option<&str>, verb: &str) -> Result<f64, TokenError> {
    let w = word.ok_or_else(|| TokenError::Incomplete(verb.to_string()))?;
    match w.parse::<f64>() {
        Ok(v) if (0.0..=1.0).contains(&v) => Ok(v),
        _ => Err(TokenError::Coordinate(w.to_string())),
    }
}

pub fn parse(text: &str) -> Result<Vec<InstructionToken>, TokenError> {
    let mut out = Vec::new();
    let mut words = text.split_whitespace();
    while let Some(w) = words.next() {
        if let Some(m) = Motion::parse(w) {
            out.push(InstructionToken::Motion(m));
            continue;
        }
        let verb = Verb::parse(w).ok_or_else(|| TokenError::Unknown(w.to_string()))?;
        let object_type = words.next().ok_or_else(|| TokenError::Incomplete(w.to_string()))?;
        if words.next() != Some("at") {
            return Err(TokenError::Incomplete(w.to_string()));
        }
        let x = coordinate(words.next(), w)?;
        let y = coordinate(words.next(), w)?;
        out.push(InstructionToken::Interact {
            verb,
            object_type: object_type.to_string(),
            x,
            y,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_instruction_parses() {
        let tokens = parse("Forward Forward TurnRight LookUp Pickup Mug at 0.57 0.25").unwrap();
        assert_eq!(tokens.len(), 5);
        assert_eq!(tokens[2], InstructionToken::Motion(Motion::TurnRight));
        assert_eq!(tokens[4], InstructionToken::interact(Verb::Pickup, "Mug", 0.57, 0.25));
        assert_eq!(render(&tokens), "Forward Forward TurnRight LookUp Pickup Mug at 0.57 0.25");
    }

    #[test]
    fn malformed_tokens() {
        assert_eq!(parse("Jump"), Err(TokenError::Unknown("Jump".into())));
        assert_eq!(parse("Pickup Mug 0.5 0.5"), Err(TokenError::Incomplete("Pickup".into())));
        assert_eq!(parse("Pickup Mug at 1.5 0.5"), Err(TokenError::Coordinate("1.5".into())));
        assert_eq!(parse(""), Ok(vec![]));
    }
}
