//! Seeded synthetic inputs for benchmarks and recovery checks.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{LadError, Result};
use crate::matrix::DataMatrix;
use crate::temporal::TimeSeriesPanel;

/// Standard Gaussian matrix.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> Result<DataMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..rows * cols)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    DataMatrix::from_row_major(rows, cols, values)
}

/// Panel of noisy copies of a shared growth curve, some of which shift away
/// from the cohort from `onset` onwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InjectionSpec {
    pub series: usize,
    pub length: usize,
    pub features: usize,
    pub injected: usize,
    pub onset: usize,
    /// Shift of the injected series in units of the noise standard deviation.
    pub shift: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for InjectionSpec {
    fn default() -> Self {
        InjectionSpec {
            series: 100,
            length: 60,
            features: 2,
            injected: 5,
            onset: 20,
            shift: 4.0,
            noise: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InjectedPanel {
    pub panel: TimeSeriesPanel,
    /// Indices of the shifted series, ascending.
    pub injected: Vec<usize>,
}

pub fn injection_panel(spec: &InjectionSpec) -> Result<InjectedPanel> {
    if spec.injected > spec.series {
        return Err(LadError::domain("more injected series than series"));
    }
    if spec.onset >= spec.length {
        return Err(LadError::domain("onset must fall inside the panel"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut injected = sample(&mut rng, spec.series, spec.injected).into_vec();
    injected.sort_unstable();
    let mut is_injected = vec![false; spec.series];
    for &i in &injected {
        is_injected[i] = true;
    }

    // logistic cumulative curve, one scale per feature
    let mid = spec.length as f64 / 2.0;
    let curve = |t: usize, f: usize| {
        let scale = 50.0 * (f + 1) as f64;
        scale / (1.0 + (-(t as f64 - mid) / 6.0).exp())
    };
    let mut values = Vec::with_capacity(spec.series * spec.length * spec.features);
    for &inj in &is_injected {
        for t in 0..spec.length {
            for f in 0..spec.features {
                let noise: f64 = rng.sample(StandardNormal);
                let mut v = curve(t, f) + spec.noise * noise;
                if inj && t >= spec.onset {
                    v += spec.shift * spec.noise;
                }
                values.push(v);
            }
        }
    }
    let panel = TimeSeriesPanel::new(spec.series, spec.length, spec.features, values)?
        .with_series_ids((0..spec.series).map(|i| format!("s{i:03}")).collect())?;
    Ok(InjectedPanel { panel, injected })
}
