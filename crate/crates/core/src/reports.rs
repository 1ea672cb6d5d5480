//! Multi-model computations behind the command-line tool: N' for model sets,
//! the Table 1 sweep and the complexity curves of Figure 1.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fia::{c_fia, integrate_sqrt_det, n_prime_set, ComplexityEstimate, FiaTerms, NPrimeResult};
use crate::model::MptModel;
use crate::nml::{c_nml_with, outcome_count, Allocation, NmlOptions};
use crate::zoo::{self, Preset, TABLE1_COLUMNS};

/// A record of one estimate for one model, as written by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRecord {
    pub model: String,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(flatten)]
    pub estimate: ComplexityEstimate,
}

/// Log-integrals of several models. Every model uses the same seed.
pub fn log_integrals(models: &[MptModel], samples: u64, seed: u64) -> Result<Vec<ComplexityEstimate>> {
    models
        .iter()
        .map(|m| integrate_sqrt_det(m, samples, seed))
        .collect()
}

pub fn fia_terms(models: &[MptModel], samples: u64, seed: u64) -> Result<Vec<FiaTerms>> {
    Ok(log_integrals(models, samples, seed)?
        .into_iter()
        .zip(models)
        .map(|(li, m)| FiaTerms::new(m.free_count(), li))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NPrimeReport {
    pub models: Vec<String>,
    pub free_counts: Vec<usize>,
    pub log_integrals: Vec<ComplexityEstimate>,
    #[serde(flatten)]
    pub result: NPrimeResult,
    pub minimum_integer_n: u64,
}

pub fn n_prime_report(models: &[MptModel], samples: u64, seed: u64) -> Result<NPrimeReport> {
    assemble_n_prime(models, &fia_terms(models, samples, seed)?)
}

fn assemble_n_prime(models: &[MptModel], terms: &[FiaTerms]) -> Result<NPrimeReport> {
    let result = n_prime_set(terms)?;
    Ok(NPrimeReport {
        models: models.iter().map(|m| m.name().to_string()).collect(),
        free_counts: terms.iter().map(|t| t.free_count).collect(),
        log_integrals: terms.iter().map(|t| t.log_integral).collect(),
        minimum_integer_n: result.minimum_integer_n(),
        result,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Family {
    pub name: &'static str,
    pub models: [&'static str; 2],
}

pub const FAMILIES: [Family; 3] = [
    Family {
        name: "Decision strategies",
        models: ["ttb", "waddprob"],
    },
    Family {
        name: "Source monitoring",
        models: ["sm-5b", "sm-4"],
    },
    Family {
        name: "Who said what?",
        models: ["wsw-full-D", "wsw-eq-d"],
    },
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1Cell {
    pub preset: String,
    pub n_prime: f64,
    pub std_error: f64,
    pub minimum_integer_n: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1Row {
    pub family: String,
    pub models: Vec<String>,
    pub cells: Vec<Table1Cell>,
}

/// N' of one family at each proportion preset.
pub fn table1_row(family: &Family, columns: &[Preset], samples: u64, seed: u64) -> Result<Table1Row> {
    let cells = columns
        .iter()
        .map(|&preset| {
            let models = family
                .models
                .iter()
                .map(|id| zoo::get(id)?.model_with(preset))
                .collect::<Result<Vec<_>>>()?;
            let r = n_prime_set(&fia_terms(&models, samples, seed)?)?;
            Ok(Table1Cell {
                preset: preset.to_string(),
                n_prime: r.lower_bound,
                std_error: r.lower_bound_se,
                minimum_integer_n: r.minimum_integer_n(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Table1Row {
        family: family.name.to_string(),
        models: family.models.iter().map(|s| s.to_string()).collect(),
        cells,
    })
}

pub fn table1(samples: u64, seed: u64) -> Result<Vec<Table1Row>> {
    FAMILIES
        .iter()
        .map(|f| table1_row(f, &TABLE1_COLUMNS, samples, seed))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Fia,
    Nml,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub model: String,
    #[serde(rename = "N")]
    pub n: u64,
    pub kind: CurveKind,
    pub value: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curves {
    pub points: Vec<CurvePoint>,
    /// Intersection of the FIA curves, when two or more models are given.
    pub n_prime: Option<NPrimeReport>,
}

/// FIA curves for every model, plus exact NML wherever the outcome space of
/// an N fits under the enumeration cap.
pub fn curves(models: &[MptModel], ns: &[u64], samples: u64, seed: u64, nml: &NmlOptions) -> Result<Curves> {
    if ns.is_empty() {
        return Err(Error::InvalidArgument("empty N range".into()));
    }
    let terms = fia_terms(models, samples, seed)?;
    let mut points = Vec::new();
    for (m, t) in models.iter().zip(&terms) {
        for &n in ns {
            let c = c_fia(&t.log_integral, t.free_count, n as f64)?;
            points.push(CurvePoint {
                model: m.name().to_string(),
                n,
                kind: CurveKind::Fia,
                value: c.value,
                se: c.std_error,
            });
        }
        for &n in ns {
            let alloc = Allocation::for_model(m, n)?;
            if outcome_count(m, &alloc).is_none_or(|c| c > nml.cap as u128) {
                continue;
            }
            points.push(CurvePoint {
                model: m.name().to_string(),
                n,
                kind: CurveKind::Nml,
                value: c_nml_with(m, &alloc, nml)?.value,
                se: 0.0,
            });
        }
    }
    let n_prime = if models.len() >= 2 {
        Some(assemble_n_prime(models, &terms)?)
    } else {
        None
    };
    Ok(Curves { points, n_prime })
}
