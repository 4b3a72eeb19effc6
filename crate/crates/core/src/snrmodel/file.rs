//! Fitted model file: a TOML document with a `version`, the fit `mode`, the
//! scenario hash and one `[[class]]` table per link class holding
//! `a, b, c, nu, mu` (linear gains before `p_t/σ²`), `residual_norm`,
//! `points`, `iterations` and an optional `inherited_from` class name.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClassFit, FitMode, SnrModel, SnrParams};
use crate::error::{Error, Result};
use crate::scenario::{LinkClass, Visibility};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u32,
    mode: FitMode,
    scenario_hash: String,
    #[serde(rename = "class")]
    classes: Vec<ClassEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassEntry {
    ap: Visibility,
    irs: Visibility,
    a: f64,
    b: f64,
    c: f64,
    nu: f64,
    mu: f64,
    residual_norm: f64,
    points: usize,
    iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    inherited_from: Option<LinkClass>,
}

fn toml_error(text: &str, e: toml::de::Error) -> Error {
    let line = e
        .span()
        .map(|r| text[..r.start.min(text.len())].lines().count().max(1))
        .unwrap_or(0);
    Error::parse(line, "model", e.message().to_string())
}

impl SnrModel {
    pub fn to_toml_string(&self) -> String {
        let file = ModelFile {
            version: MODEL_FORMAT_VERSION,
            mode: self.mode,
            scenario_hash: self.scenario_hash.clone(),
            classes: LinkClass::ALL
                .iter()
                .map(|c| {
                    let f = &self.classes[c.index()];
                    ClassEntry {
                        ap: c.ap,
                        irs: c.irs,
                        a: f.params.a,
                        b: f.params.b,
                        c: f.params.c,
                        nu: f.params.nu,
                        mu: f.params.mu,
                        residual_norm: f.residual_norm,
                        points: f.points,
                        iterations: f.iterations,
                        inherited_from: f.inherited_from,
                    }
                })
                .collect(),
        };
        toml::to_string(&file).expect("model serializes")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: toml::Table = toml::from_str(text).map_err(|e| toml_error(text, e))?;
        match raw.get("version").and_then(|v| v.as_integer()) {
            Some(v) if v == MODEL_FORMAT_VERSION as i64 => {}
            Some(v) => {
                return Err(Error::UnsupportedVersion {
                    found: v.to_string(),
                    expected: MODEL_FORMAT_VERSION,
                })
            }
            None => return Err(Error::parse(1, "version", "missing or not an integer")),
        }
        let file: ModelFile = toml::from_str(text).map_err(|e| toml_error(text, e))?;
        let mut slots: [Option<ClassFit>; 4] = Default::default();
        for e in file.classes {
            let class = LinkClass::new(e.ap, e.irs);
            let params = SnrParams {
                a: e.a,
                b: e.b,
                c: e.c,
                nu: e.nu,
                mu: e.mu,
            };
            if !params.is_nonnegative() {
                return Err(Error::parse(
                    0,
                    format!("class {class}"),
                    "parameters must be nonnegative",
                ));
            }
            slots[class.index()] = Some(ClassFit {
                params,
                residual_norm: e.residual_norm,
                points: e.points,
                iterations: e.iterations,
                inherited_from: e.inherited_from,
            });
        }
        let mut classes = Vec::with_capacity(4);
        for (i, s) in slots.into_iter().enumerate() {
            classes.push(
                s.ok_or_else(|| Error::parse(0, "class", format!("missing class {}", LinkClass::from_index(i))))?,
            );
        }
        Ok(SnrModel {
            mode: file.mode,
            classes: classes.try_into().expect("four classes"),
            scenario_hash: file.scenario_hash,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }
}
