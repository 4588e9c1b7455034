//! Monte Carlo risk profiles: sampled leak trajectories under each shutdown
//! level held fixed, summarized per Markov step.
//!
//! All levels are driven by the same uniform draws (common random numbers),
//! so the curves differ only by the effect of the level. Trajectories are
//! split into fixed-size chunks, each with its own ChaCha stream, which keeps
//! the output independent of thread count.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::EvolutionError;
use crate::evolution::{transition_matrix_for_level, LeakBelief, TransitionMatrix};
use crate::scenario::ScenarioBundle;

pub const CHUNK: u64 = 4096;
pub const CSV_HEADER: &str = "step,level,ignition_prob,mean_cost";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelCurve {
    pub level: usize,
    pub name: String,
    /// Trajectories ignited by each step, index 0 = start.
    pub ignited: Vec<u64>,
    /// `belief * M^t` ignited mass for the same steps.
    pub analytic: Vec<f64>,
    pub production_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Simulation {
    pub trajectories: u64,
    pub steps: u64,
    pub step_duration: f64,
    pub ignition_loss: f64,
    pub seed: u64,
    pub curves: Vec<LevelCurve>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileRow<'a> {
    pub step: u64,
    pub level: &'a str,
    pub ignition_prob: f64,
    pub mean_cost: f64,
}

impl LevelCurve {
    pub fn ignition_prob(&self, step: usize, trajectories: u64) -> f64 {
        self.ignited[step] as f64 / trajectories as f64
    }

    /// Binomial standard error of the sampled frequency at `step`, using the
    /// analytic probability.
    pub fn standard_error(&self, step: usize, trajectories: u64) -> f64 {
        let p = self.analytic[step];
        (p * (1.0 - p) / trajectories as f64).sqrt()
    }
}

impl Simulation {
    /// Rows in CSV order: by step, then by level.
    pub fn rows(&self) -> impl Iterator<Item = ProfileRow<'_>> {
        (0..=self.steps as usize).flat_map(move |step| {
            self.curves.iter().map(move |c| {
                let ignition_prob = c.ignition_prob(step, self.trajectories);
                ProfileRow {
                    step: step as u64,
                    level: &c.name,
                    ignition_prob,
                    mean_cost: c.production_rate * step as f64 * self.step_duration
                        + self.ignition_loss * ignition_prob,
                }
            })
        })
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for row in self.rows() {
            writeln!(
                out,
                "{},{},{},{}",
                row.step, row.level, row.ignition_prob, row.mean_cost
            )?;
        }
        Ok(())
    }
}

fn sample_row(row: &[f64; 4], u: f64) -> usize {
    let mut acc = 0.0;
    for (j, p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return j;
        }
    }
    // Rounding left `u` above the last partial sum: take the last state with mass.
    row.iter().rposition(|&p| p > 0.0).unwrap_or(3)
}

fn run_chunk(
    initial: &[f64; 4],
    matrices: &[TransitionMatrix],
    steps: u64,
    seed: u64,
    chunk: u64,
    count: u64,
) -> Vec<Vec<u64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    let mut ignited = vec![vec![0u64; steps as usize + 1]; matrices.len()];
    let mut draws = vec![0.0f64; steps as usize];
    for _ in 0..count {
        let start = sample_row(initial, rng.random::<f64>());
        for d in draws.iter_mut() {
            *d = rng.random::<f64>();
        }
        for (m, counts) in matrices.iter().zip(ignited.iter_mut()) {
            let mut state = start;
            counts[0] += u64::from(state == 3);
            for (t, &u) in draws.iter().enumerate() {
                if state != 3 {
                    state = sample_row(&m.rows[state], u);
                }
                counts[t + 1] += u64::from(state == 3);
            }
        }
    }
    ignited
}

/// Samples `trajectories` paths of `steps` Markov steps from `initial` under
/// every shutdown level.
pub fn simulate(
    bundle: &ScenarioBundle,
    initial: &LeakBelief,
    steps: u64,
    trajectories: u64,
    seed: u64,
) -> Result<Simulation, EvolutionError> {
    let matrices = (0..bundle.level_count())
        .map(|l| transition_matrix_for_level(&bundle.transitions, l))
        .collect::<Result<Vec<_>, _>>()?;
    let chunks = trajectories.div_ceil(CHUNK);
    let partials: Vec<Vec<Vec<u64>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = CHUNK.min(trajectories - c * CHUNK);
            run_chunk(&initial.0, &matrices, steps, seed, c, count)
        })
        .collect();

    let curves = matrices
        .iter()
        .enumerate()
        .map(|(level, m)| {
            let mut ignited = vec![0u64; steps as usize + 1];
            for part in &partials {
                for (total, n) in ignited.iter_mut().zip(&part[level]) {
                    *total += n;
                }
            }
            let mut analytic = Vec::with_capacity(steps as usize + 1);
            let mut b = *initial;
            analytic.push(b.ignited());
            for _ in 0..steps {
                b = m.step(&b);
                analytic.push(b.ignited());
            }
            LevelCurve {
                level,
                name: bundle.transitions.levels[level].name.clone(),
                ignited,
                analytic,
                production_rate: bundle.production_rate(level).unwrap_or(0.0),
            }
        })
        .collect();

    Ok(Simulation {
        trajectories,
        steps,
        step_duration: bundle.transitions.step_duration,
        ignition_loss: bundle.value.ignition_loss,
        seed,
        curves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::builtin_gas_compressor;

    fn prior() -> LeakBelief {
        LeakBelief([0.90, 0.08, 0.02, 0.0])
    }

    #[test]
    fn deterministic_across_runs() {
        let b = builtin_gas_compressor();
        let a = simulate(&b, &prior(), 20, 10_000, 3).unwrap();
        let c = simulate(&b, &prior(), 20, 10_000, 3).unwrap();
        assert_eq!(a, c);
        let mut x = Vec::new();
        let mut y = Vec::new();
        a.write_csv(&mut x).unwrap();
        c.write_csv(&mut y).unwrap();
        assert_eq!(x, y);
        let d = simulate(&b, &prior(), 20, 10_000, 4).unwrap();
        assert_ne!(a.curves[0].ignited, d.curves[0].ignited);
    }

    #[test]
    fn csv_layout() {
        let b = builtin_gas_compressor();
        let sim = simulate(&b, &prior(), 2, 100, 0).unwrap();
        let mut out = Vec::new();
        sim.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 1 + 3 * 4);
        assert_eq!(lines[1], "0,continue,0,0");
        assert!(lines[4].starts_with("0,esd,0,"));
        assert!(lines[5].starts_with("1,continue,"));
    }

    #[test]
    fn coupled_curves_are_pathwise_ordered() {
        let b = builtin_gas_compressor();
        let sim = simulate(&b, &LeakBelief([0.2, 0.5, 0.3, 0.0]), 30, 5_000, 11).unwrap();
        for pair in sim.curves.windows(2) {
            for (lo, hi) in pair[0].ignited.iter().zip(&pair[1].ignited) {
                assert!(lo >= hi);
            }
        }
    }

    #[test]
    fn point_masses_are_exact() {
        let b = builtin_gas_compressor();
        let none = simulate(&b, &LeakBelief([1.0, 0.0, 0.0, 0.0]), 5, 1_000, 1).unwrap();
        // esd has s = 0: nothing can ever start.
        assert!(none.curves[3].ignited.iter().all(|&n| n == 0));
        let ign = simulate(&b, &LeakBelief([0.0, 0.0, 0.0, 1.0]), 5, 1_000, 1).unwrap();
        assert!(ign.curves.iter().all(|c| c.ignited.iter().all(|&n| n == 1_000)));
    }

    #[test]
    fn sample_row_inverts_cdf() {
        let row = [0.0, 0.5, 0.3, 0.2];
        assert_eq!(sample_row(&row, 0.0), 1);
        assert_eq!(sample_row(&row, 0.49), 1);
        assert_eq!(sample_row(&row, 0.5), 2);
        assert_eq!(sample_row(&row, 0.85), 3);
        assert_eq!(sample_row(&[0.0, 0.0, 1.0, 0.0], 0.9999999999), 2);
    }
}
