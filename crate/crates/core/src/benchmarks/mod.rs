//! Reference spectra of the benchmark domains and the studies built on
//! them.

mod studies;

pub use studies::{
    convergence_study, least_squares_slope, pollution_demo, ConvergenceRow, ConvergenceStudy,
    NaiveValue, Placement, PollutionReport,
};

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::mesh::DomainKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// Closed form.
    Exact,
    /// High-precision values from the literature, not exact.
    Literature,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceValue {
    pub value: f64,
    pub multiplicity: usize,
    pub note: String,
}

/// Positive eigenfrequencies of a benchmark, ascending.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSpectrum {
    pub domain: DomainKind,
    pub provenance: Provenance,
    pub entries: Vec<ReferenceValue>,
}

impl ReferenceSpectrum {
    /// Values repeated by multiplicity.
    pub fn values(&self) -> Vec<f64> {
        self.entries
            .iter()
            .flat_map(|e| std::iter::repeat_n(e.value, e.multiplicity))
            .collect()
    }

    /// 1-based value counted with multiplicity.
    pub fn value(&self, index: usize) -> Option<f64> {
        self.values().get(index.checked_sub(1)?).copied()
    }

    /// The entry holding the `index`-th value counted with multiplicity.
    pub fn entry(&self, index: usize) -> Option<&ReferenceValue> {
        let mut seen = 0;
        for e in &self.entries {
            seen += e.multiplicity;
            if index >= 1 && index <= seen {
                return Some(e);
            }
        }
        None
    }

    pub fn len(&self) -> usize {
        self.entries.iter().map(|e| e.multiplicity).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of values inside `(a, b)`, with multiplicity.
    pub fn count_in(&self, a: f64, b: f64) -> usize {
        self.entries
            .iter()
            .filter(|e| a < e.value && e.value < b)
            .map(|e| e.multiplicity)
            .sum()
    }
}

/// Squared norms `l^2 + m^2` of the lattice pairs `l, m >= 0` up to
/// `max`, with the number of ordered pairs attaining each.
fn lattice_norms(max: u64) -> Vec<(u64, usize)> {
    let mut counts = std::collections::BTreeMap::new();
    let lim = (max as f64).sqrt() as u64 + 1;
    for l in 0..=lim {
        for m in 0..=lim {
            let s = l * l + m * m;
            if s > 0 && s <= max {
                *counts.entry(s).or_insert(0usize) += 1;
            }
        }
    }
    counts.into_iter().collect()
}

/// Enough lattice norms for `need` values with multiplicity or `need`
/// distinct values.
fn lattice_until(need: usize, distinct: bool) -> Vec<(u64, usize)> {
    let mut max = 16;
    loop {
        let norms = lattice_norms(max);
        let have = if distinct {
            norms.len()
        } else {
            norms.iter().map(|p| p.1).sum()
        };
        if have >= need {
            return norms;
        }
        max *= 4;
    }
}

fn square_entry(s: u64, mult: usize) -> ReferenceValue {
    ReferenceValue {
        value: (s as f64).sqrt(),
        multiplicity: mult,
        note: format!("sqrt({s})"),
    }
}

/// The first `count` eigenfrequencies of the unit-coefficient square
/// `(0, pi)^2`, `sqrt(l^2 + m^2)`, counted with multiplicity. A value whose
/// multiplicity would overrun `count` is truncated.
pub fn square_exact(count: usize) -> ReferenceSpectrum {
    let mut entries = Vec::new();
    let mut left = count;
    for (s, mult) in lattice_until(count, false) {
        if left == 0 {
            break;
        }
        let take = mult.min(left);
        entries.push(square_entry(s, take));
        left -= take;
    }
    ReferenceSpectrum {
        domain: DomainKind::Square,
        provenance: Provenance::Exact,
        entries,
    }
}

/// The first `count` distinct eigenfrequencies of the square with their
/// full multiplicities.
pub fn square_exact_distinct(count: usize) -> ReferenceSpectrum {
    let entries = lattice_until(count, true)
        .into_iter()
        .take(count)
        .map(|(s, m)| square_entry(s, m))
        .collect();
    ReferenceSpectrum {
        domain: DomainKind::Square,
        provenance: Provenance::Exact,
        entries,
    }
}

fn lit(value: f64, multiplicity: usize, note: &str) -> ReferenceValue {
    ReferenceValue {
        value,
        multiplicity,
        note: note.to_string(),
    }
}

/// Embedded literature spectra for the domains without a closed form.
pub fn literature_reference(domain: DomainKind) -> Result<ReferenceSpectrum, Error> {
    let entries = match domain {
        DomainKind::Lshape => vec![
            lit(0.773334985176, 1, "Dauge benchmark"),
            lit(1.19678275574, 1, "Dauge benchmark"),
            lit(2.0, 2, "exact; smooth eigenfunctions"),
            lit(2.14848368266, 1, "Dauge benchmark"),
        ],
        DomainKind::Slit => vec![
            lit(0.647375015, 1, "approximate"),
            lit(1.0, 1, "exact"),
            lit(1.280686161, 1, "approximate"),
            lit(2.0, 2, "exact"),
            lit(2.096486081, 1, "approximate"),
            lit(2.229523505, 1, "approximate"),
        ],
        DomainKind::Square4 => [
            1.15954813181,
            1.16804100636,
            1.5834295853,
            2.3757369919,
            2.4724291674,
            2.5288205712,
            2.7487894882,
            3.2334726763,
            3.47832176265,
            3.51802898831,
        ]
        .into_iter()
        .map(|v| lit(v, 1, "Dauge benchmark, upper bound"))
        .collect(),
        DomainKind::Square => {
            return Err(Error::Invalid(
                "the square has a closed-form spectrum; use square_exact".into(),
            ))
        }
    };
    Ok(ReferenceSpectrum {
        domain,
        provenance: Provenance::Literature,
        entries,
    })
}

/// The reference spectrum of any benchmark with at least `count` values
/// when available.
pub fn reference_for(domain: DomainKind, count: usize) -> Result<ReferenceSpectrum, Error> {
    match domain {
        DomainKind::Square => Ok(square_exact(count)),
        other => literature_reference(other),
    }
}
