//! JSON description of a system.
//!
//! ```json
//! {
//!   "h": [[1, 1, 1.0], [0, 2, -0.5]],
//!   "modes": [{"k": [1, 0], "cos": 0.0, "sin": 0.15915494309189535}],
//!   "R": 2.0,
//!   "resonance": {"k": [0, 1], "a": 0.0, "S": [[0.25, 0.0], [1.75, 0.0]],
//!                 "Sstar": [[0.5, 0.0], [1.5, 0.0]], "varpi": 0.5}
//! }
//! ```
//!
//! Polynomials are lists of `[p1, p2, c]` for `c I1^p1 I2^p2`; a mode
//! coefficient may also be a plain number.

use crate::catalog::SystemSpec;
use crate::error::{Error, Result};
use crate::phase::{FourierMode, FourierPerturbation, PolyField, ResonanceData};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefficientJson {
    Constant(f64),
    Poly(Vec<(u32, u32, f64)>),
}

impl CoefficientJson {
    fn to_poly(&self) -> PolyField {
        match self {
            Self::Constant(c) => PolyField::constant(*c),
            Self::Poly(t) => PolyField::from_terms(t.iter().copied()),
        }
    }

    fn from_poly(p: &PolyField) -> Self {
        if p.is_constant() {
            Self::Constant(p.eval([0.0, 0.0]))
        } else {
            Self::Poly(p.to_triples())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeJson {
    pub k: [i64; 2],
    pub cos: CoefficientJson,
    pub sin: CoefficientJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonanceJson {
    pub k: [i64; 2],
    pub a: f64,
    #[serde(rename = "S")]
    pub segment: [[f64; 2]; 2],
    #[serde(rename = "Sstar")]
    pub core: [[f64; 2]; 2],
    pub varpi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemJson {
    pub h: Vec<(u32, u32, f64)>,
    pub modes: Vec<ModeJson>,
    #[serde(rename = "R")]
    pub radius: f64,
    pub resonance: ResonanceJson,
}

impl SystemJson {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_spec(&self) -> Result<SystemSpec> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(crate::error::invalid("R", format!("must be positive, got {}", self.radius)));
        }
        let r = &self.resonance;
        let modes = self.modes.iter().map(|m| FourierMode { k: m.k, cos: m.cos.to_poly(), sin: m.sin.to_poly() });
        Ok(SystemSpec {
            h: PolyField::from_terms(self.h.iter().copied()),
            perturbation: FourierPerturbation::from_modes(modes),
            radius: self.radius,
            resonance: ResonanceData::new(r.k, r.a, r.segment, r.core, r.varpi)?,
        })
    }

    pub fn from_spec(spec: &SystemSpec) -> Self {
        let r = &spec.resonance;
        Self {
            h: spec.h.to_triples(),
            modes: spec
                .perturbation
                .modes()
                .iter()
                .map(|m| ModeJson { k: m.k, cos: CoefficientJson::from_poly(&m.cos), sin: CoefficientJson::from_poly(&m.sin) })
                .collect(),
            radius: spec.radius,
            resonance: ResonanceJson { k: r.k, a: r.a, segment: r.segment, core: r.core, varpi: r.varpi },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::catalog;

    #[test]
    fn catalog_round_trips() {
        for e in catalog() {
            let spec = e.spec().unwrap();
            let text = serde_json::to_string(&SystemJson::from_spec(&spec)).unwrap();
            let back = SystemJson::parse(&text).unwrap().to_spec().unwrap();
            let th = [0.21, 0.67];
            let i = spec.resonance.segment[0];
            assert!((back.perturbation.eval(th, i) - spec.perturbation.eval(th, i)).abs() < 1e-15, "{}", e.name);
            assert_eq!(back.h.eval(i), spec.h.eval(i));
            assert_eq!(back.resonance, spec.resonance);
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let good = r#"{"h": [[1,1,1.0]], "modes": [{"k": [1,0], "cos": 0.0, "sin": [[1,0,0.5]]}], "R": 3.0,
            "resonance": {"k": [0,1], "a": 0.0, "S": [[0.5,0.0],[2.5,0.0]], "Sstar": [[1.0,0.0],[2.0,0.0]], "varpi": 1.0}}"#;
        let spec = SystemJson::parse(good).unwrap().to_spec().unwrap();
        assert!(!spec.perturbation.is_action_independent());
        let bad = good.replace("\"R\"", "\"radius\"");
        assert!(matches!(SystemJson::parse(&bad), Err(Error::Parse(_))));
        let extra = good.replace("\"varpi\": 1.0", "\"varpi\": 1.0, \"delta\": 2");
        assert!(SystemJson::parse(&extra).is_err());
    }
}
