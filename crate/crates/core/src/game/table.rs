use std::fs;
use std::path::Path;

use serde_json::{Map, Value};

use super::{CooperativeGame, Utility};
use crate::coalition::Coalition;
use crate::error::{Error, Result};

/// Format tag written into every table file.
pub const TABLE_FORMAT: &str = "shapfair-game-v1";

/// Largest player count stored as a dense table.
pub const TABLE_MAX_PLAYERS: usize = 20;

/// Dense characteristic function: `values[mask] = v(mask)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GameTable {
    n: usize,
    values: Vec<f64>,
}

impl GameTable {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || n > TABLE_MAX_PLAYERS {
            return Err(Error::Capacity {
                what: "game table",
                max: TABLE_MAX_PLAYERS,
                n,
            });
        }
        if values.len() != 1usize << n {
            return Err(Error::LengthMismatch {
                expected: 1 << n,
                actual: values.len(),
            });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!(
                "value for coalition {bad} is not finite"
            )));
        }
        Ok(GameTable { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_game(self, label: impl Into<String>) -> Result<CooperativeGame> {
        CooperativeGame::new(label, Box::new(self))
    }

    fn to_json(&self) -> Value {
        let values: Map<String, Value> = self
            .values
            .iter()
            .enumerate()
            .map(|(mask, v)| (mask.to_string(), Value::from(*v)))
            .collect();
        let mut doc = Map::new();
        doc.insert("format".into(), TABLE_FORMAT.into());
        doc.insert("n".into(), self.n.into());
        doc.insert("values".into(), Value::Object(values));
        Value::Object(doc)
    }

    fn from_json(doc: &Value) -> Result<Self> {
        let obj = doc
            .as_object()
            .ok_or_else(|| Error::Format("table document must be an object".into()))?;
        match obj.get("format").and_then(Value::as_str) {
            Some(TABLE_FORMAT) => {}
            other => {
                return Err(Error::Format(format!(
                    "expected format {TABLE_FORMAT:?}, found {other:?}"
                )))
            }
        }
        let n = obj
            .get("n")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Format("missing integer field `n`".into()))?
            as usize;
        if n == 0 || n > TABLE_MAX_PLAYERS {
            return Err(Error::Format(format!(
                "table n must be in 1..={TABLE_MAX_PLAYERS}, got {n}"
            )));
        }
        let entries = obj
            .get("values")
            .and_then(Value::as_object)
            .ok_or_else(|| Error::Format("missing object field `values`".into()))?;
        let size = 1usize << n;
        let mut values = vec![None; size];
        for (key, raw) in entries {
            let mask: usize = key.parse().map_err(|_| {
                Error::Format(format!("coalition key {key:?} is not a decimal bitmask"))
            })?;
            if mask >= size || key != &mask.to_string() {
                return Err(Error::Format(format!(
                    "coalition key {key:?} is not a canonical bitmask below 2^{n}"
                )));
            }
            let v = raw.as_f64().filter(|v| v.is_finite()).ok_or_else(|| {
                Error::Format(format!(
                    "value for coalition {key} is not a finite number: {raw}"
                ))
            })?;
            values[mask] = Some(v);
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(mask, v)| {
                v.ok_or_else(|| Error::Format(format!("missing value for coalition {mask}")))
            })
            .collect::<Result<Vec<_>>>()?;
        GameTable::new(n, values)
    }
}

impl Utility for GameTable {
    fn n(&self) -> usize {
        self.n
    }

    fn value(&self, c: Coalition) -> Result<f64> {
        Ok(self.values[c.bits() as usize])
    }
}

/// Reads a table file and wraps it as a game.
pub fn load_table(path: impl AsRef<Path>) -> Result<CooperativeGame> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: Value = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    GameTable::from_json(&doc)?.into_game(format!("table:{}", path.display()))
}

/// Writes every coalition value of `game` to a table file.
pub fn save_table(game: &CooperativeGame, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let table = game.to_table()?;
    let mut text =
        serde_json::to_string(&table.to_json()).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{make_synthetic, SyntheticGame};

    fn write(dir: &tempfile::TempDir, body: &str) -> std::path::PathBuf {
        let p = dir.path().join("g.json");
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn additive_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = make_synthetic(&SyntheticGame::Additive {
            weights: vec![1.0, 2.0, 3.0],
        })
        .unwrap();
        let p = dir.path().join("add.json");
        save_table(&g, &p).unwrap();
        let back = load_table(&p).unwrap();
        assert_eq!(back.to_table().unwrap(), g.to_table().unwrap());
        assert_eq!(back.to_table().unwrap().values().len(), 8);
    }

    #[test]
    fn missing_empty_coalition_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            r#"{"format":"shapfair-game-v1","n":1,"values":{"1":1.0}}"#,
        );
        let err = load_table(&p).unwrap_err();
        assert!(
            matches!(err, Error::Format(ref m) if m.contains("coalition 0")),
            "{err}"
        );
    }

    #[test]
    fn nan_value_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            r#"{"format":"shapfair-game-v1","n":1,"values":{"0":0.0,"1":"NaN"}}"#,
        );
        assert!(matches!(load_table(&p), Err(Error::Format(_))));
        let p = write(
            &dir,
            r#"{"format":"shapfair-game-v1","n":1,"values":{"0":0.0,"1":NaN}}"#,
        );
        assert!(matches!(load_table(&p), Err(Error::Format(_))));
    }

    #[test]
    fn oversized_and_malformed_tables_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, r#"{"format":"shapfair-game-v1","n":21,"values":{}}"#);
        assert!(matches!(load_table(&p), Err(Error::Format(_))));
        let p = write(&dir, r#"{"format":"other","n":1,"values":{"0":0,"1":1}}"#);
        assert!(matches!(load_table(&p), Err(Error::Format(_))));
        let p = write(
            &dir,
            r#"{"format":"shapfair-game-v1","n":1,"values":{"0":0,"1":1,"2":5}}"#,
        );
        assert!(matches!(load_table(&p), Err(Error::Format(_))));
        let p = write(
            &dir,
            r#"{"format":"shapfair-game-v1","n":1,"values":{"0":0,"01":1}}"#,
        );
        assert!(matches!(load_table(&p), Err(Error::Format(_))));
    }

    #[test]
    fn integer_literals_are_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            r#"{"format":"shapfair-game-v1","n":1,"values":{"0":0,"1":2}}"#,
        );
        let g = load_table(&p).unwrap();
        assert_eq!(g.evaluate(Coalition::from_bits(1)).unwrap(), 2.0);
    }
}
