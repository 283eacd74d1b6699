use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use dtoda::hydro::HodographData;
use dtoda::potential::{Case, LGPotential};
use dtoda::C64;
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    case: String,
    #[serde(rename = "N")]
    n: i32,
    kappa: Vec<f64>,
    b: Vec<[f64; 2]>,
    #[serde(default)]
    c: Vec<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HodographFile {
    #[serde(default)]
    a0: [f64; 2],
    #[serde(default)]
    a: BTreeMap<String, [f64; 2]>,
    #[serde(default)]
    abar: BTreeMap<String, [f64; 2]>,
}

pub fn cx(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

fn to_c(v: [f64; 2]) -> C64 {
    C64::new(v[0], v[1])
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn parse_err(path: &Path, e: serde_json::Error) -> Failure {
    Failure::Config(format!(
        "{}: line {}, column {}: {e}",
        path.display(),
        e.line(),
        e.column()
    ))
}

pub fn parse_model(text: &str, path: &Path) -> Result<LGPotential, Failure> {
    let m: ModelFile = serde_json::from_str(text).map_err(|e| parse_err(path, e))?;
    let case = match m.case.as_str() {
        "I" => Case::I,
        "II" => Case::II,
        other => {
            return Err(Failure::Config(format!(
                "{}: case must be \"I\" or \"II\", got \"{other}\"",
                path.display()
            )))
        }
    };
    LGPotential::new(
        case,
        m.n,
        m.kappa,
        m.b.into_iter().map(to_c).collect(),
        m.c.into_iter().map(to_c).collect(),
    )
    .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

pub fn load_model(path: &Path) -> Result<LGPotential, Failure> {
    parse_model(&read(path)?, path)
}

fn flow_map(map: BTreeMap<String, [f64; 2]>, name: &str, path: &Path) -> Result<BTreeMap<u32, C64>, Failure> {
    map.into_iter()
        .map(|(k, v)| match k.parse::<u32>() {
            Ok(n) if n > 0 => Ok((n, to_c(v))),
            _ => Err(Failure::Config(format!(
                "{}: {name} keys must be positive flow indices, got \"{k}\"",
                path.display()
            ))),
        })
        .collect()
}

pub fn parse_hodograph(text: &str, path: &Path) -> Result<HodographData, Failure> {
    let h: HodographFile = serde_json::from_str(text).map_err(|e| parse_err(path, e))?;
    Ok(HodographData {
        a0: to_c(h.a0),
        a: flow_map(h.a, "a", path)?,
        abar: flow_map(h.abar, "abar", path)?,
    })
}

pub fn load_hodograph(path: &Path) -> Result<HodographData, Failure> {
    parse_hodograph(&read(path)?, path)
}

pub fn write_out(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Config(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_round_trip() {
        let p = Path::new("m.json");
        let pot = parse_model(r#"{"case":"I","N":1,"kappa":[1,1],"b":[[3,0],[1,0]]}"#, p).unwrap();
        assert_eq!(pot.k_dim(), 2);
        let e = parse_model(r#"{"case":"I","N":1,"kappa":[1,1],"b":[[1,0],[1,0]]}"#, p).unwrap_err();
        assert!(matches!(e, Failure::Config(ref m) if m.contains("distinct")), "{e:?}");
        let e = parse_model("{\n\"case\": \"I\",\n\"N\": x}", p).unwrap_err();
        assert!(matches!(e, Failure::Config(ref m) if m.contains("line 3")), "{e:?}");
    }

    #[test]
    fn hodograph_keys() {
        let p = Path::new("h.json");
        let h = parse_hodograph(r#"{"a0":[1,0],"a":{"2":[0.5,0]}}"#, p).unwrap();
        assert_eq!(h.a[&2], C64::new(0.5, 0.0));
        assert!(parse_hodograph(r#"{"a":{"x":[1,0]}}"#, p).is_err());
        assert!(parse_hodograph(r#"{"a":{"0":[1,0]}}"#, p).is_err());
    }
}
