//! Built-in test systems.

use crate::error::{Error, Result};
use crate::lattice::{reduce_system, ReductionResult, CHECK_SAMPLES};
use crate::phase::{verify_channel_assumptions, FourierPerturbation, IntegrableSystem, PolyField, ResonanceData, SystemBundle};
use std::f64::consts::TAU;

/// A system in its own coordinates, before reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub h: PolyField,
    pub perturbation: FourierPerturbation,
    pub radius: f64,
    pub resonance: ResonanceData,
}

impl SystemSpec {
    pub fn integrable(&self) -> Result<IntegrableSystem> {
        IntegrableSystem::new(self.h.clone(), self.radius, self.resonance.clone())
    }

    /// `H = h + εf` in the original coordinates.
    pub fn bundle(&self, epsilon: f64) -> Result<SystemBundle> {
        SystemBundle::new(self.integrable()?, self.perturbation.clone(), epsilon)
    }

    /// Reduction to the channel `{I2 = 0}` followed by the channel checks.
    pub fn reduce(&self) -> Result<ReductionResult> {
        let red = reduce_system(&self.h, &self.perturbation, &self.resonance, self.radius)?;
        let report = verify_channel_assumptions(&red.system, CHECK_SAMPLES);
        if !report.passed() {
            return Err(Error::ChannelAssumption(format!("reduced channel checks failed: {report:?}")));
        }
        Ok(red)
    }

    /// The reduction and the reduced bundle at `ε`.
    pub fn reduced_bundle(&self, epsilon: f64) -> Result<(ReductionResult, SystemBundle)> {
        let red = self.reduce()?;
        let bundle = SystemBundle::new(red.system.clone(), red.perturbation.clone(), epsilon)?;
        Ok((red, bundle))
    }
}

pub struct CatalogEntry {
    pub name: &'static str,
    pub summary: &'static str,
    build: fn() -> Result<SystemSpec>,
}

impl CatalogEntry {
    pub fn spec(&self) -> Result<SystemSpec> {
        (self.build)()
    }
}

/// `h̃ = I1 I2 − ½ I2²`, the reduced form of the saddle `½(I1² − I2²)`.
fn reduced_saddle() -> PolyField {
    PolyField::from_terms([(1, 1, 1.0), (0, 2, -0.5)])
}

fn on_axis(a: f64, b: f64) -> [[f64; 2]; 2] {
    [[a, 0.0], [b, 0.0]]
}

fn moser() -> Result<SystemSpec> {
    Ok(SystemSpec {
        h: PolyField::from_terms([(2, 0, 0.5), (0, 2, -0.5)]),
        perturbation: FourierPerturbation::trig(&[([1, -1], 0.0, 1.0 / TAU)]),
        radius: 4.0,
        resonance: ResonanceData::new([1, 1], 0.0, [[0.25, -0.25], [1.75, -1.75]], [[0.5, -0.5], [1.5, -1.5]], 0.5)?,
    })
}

fn reduced_moser() -> Result<SystemSpec> {
    Ok(SystemSpec {
        h: reduced_saddle(),
        perturbation: FourierPerturbation::trig(&[([1, 0], 0.0, 1.0 / TAU)]),
        radius: 2.0,
        resonance: ResonanceData::new([0, 1], 0.0, on_axis(0.25, 1.75), on_axis(0.5, 1.5), 0.5)?,
    })
}

fn product() -> Result<SystemSpec> {
    Ok(SystemSpec {
        h: PolyField::from_terms([(1, 1, 1.0)]),
        perturbation: FourierPerturbation::trig(&[([1, 0], 0.0, 1.0 / TAU), ([0, 1], 0.2, 0.0)]),
        radius: 3.0,
        resonance: ResonanceData::new([0, 1], 0.0, on_axis(0.5, 2.5), on_axis(1.0, 2.0), 1.0)?,
    })
}

fn generic3() -> Result<SystemSpec> {
    Ok(SystemSpec {
        h: reduced_saddle(),
        perturbation: FourierPerturbation::trig(&[([1, 0], 0.0, 1.0 / TAU), ([0, 1], 0.2, 0.0), ([1, 1], 0.3, 0.0)]),
        radius: 2.0,
        resonance: ResonanceData::new([0, 1], 0.0, on_axis(0.5, 1.5), on_axis(0.75, 1.25), 0.75)?,
    })
}

static CATALOG: [CatalogEntry; 4] = [
    CatalogEntry {
        name: "moser",
        summary: "h = (I1^2 - I2^2)/2, f = sin(2pi(th1 - th2))/(2pi), channel along I1 + I2 = 0",
        build: moser,
    },
    CatalogEntry {
        name: "reduced-moser",
        summary: "h = I1 I2 - I2^2/2, f = sin(2pi th1)/(2pi), channel I2 = 0",
        build: reduced_moser,
    },
    CatalogEntry {
        name: "product",
        summary: "h = I1 I2, f = sin(2pi th1)/(2pi) + 0.2 cos(2pi th2), channel I2 = 0",
        build: product,
    },
    CatalogEntry {
        name: "generic3",
        summary: "h = I1 I2 - I2^2/2, f = sin(2pi th1)/(2pi) + 0.2 cos(2pi th2) + 0.3 cos(2pi(th1 + th2))",
        build: generic3,
    },
];

pub fn catalog() -> &'static [CatalogEntry] {
    &CATALOG
}

pub fn lookup(name: &str) -> Result<SystemSpec> {
    CATALOG
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| {
            let known: Vec<_> = CATALOG.iter().map(|e| e.name).collect();
            crate::error::invalid("system", format!("unknown system `{name}`; known: {}", known.join(", ")))
        })?
        .spec()
}
