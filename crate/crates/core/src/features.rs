//! Per-sample feature matrix for one step window.
//!
//! Column order: band-passed acceleration (left x, y, z, total, then right),
//! jerk of those eight channels in the same order, roll left/right, pitch
//! left/right, and optionally the peak-min label of the right AP axis.
//! Every column is standardised within the window.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use crate::dataset::{Step, Triaxial};
use crate::error::{Error, Result};
use crate::signal::{self, BiquadCascade, FilterKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub bandpass_hz: (f64, f64),
    pub bandpass_order: usize,
    pub orientation_lowpass_hz: f64,
    pub peak_window: usize,
    pub filtered_acc: bool,
    pub jerk: bool,
    pub orientation: bool,
    pub peak_min: bool,
}

impl FeatureConfig {
    /// 21 columns.
    pub fn perceptron() -> Self {
        Self {
            bandpass_hz: (0.8, 45.0),
            bandpass_order: 2,
            orientation_lowpass_hz: 60.0,
            peak_window: 25,
            filtered_acc: true,
            jerk: true,
            orientation: true,
            peak_min: true,
        }
    }

    /// 20 columns: the perceptron set without the peak-min label.
    pub fn network() -> Self {
        Self {
            peak_min: false,
            ..Self::perceptron()
        }
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        let sides = ["left", "right"];
        let axes = ["x", "y", "z", "total"];
        if self.filtered_acc {
            for s in sides {
                names.extend(axes.iter().map(|a| format!("acc_{s}_{a}")));
            }
        }
        if self.jerk {
            for s in sides {
                names.extend(axes.iter().map(|a| format!("jerk_{s}_{a}")));
            }
        }
        if self.orientation {
            for angle in ["roll", "pitch"] {
                names.extend(sides.iter().map(|s| format!("{angle}_{s}")));
            }
        }
        if self.peak_min {
            names.push("acc_right_x_peak_min".to_string());
        }
        names
    }

    pub fn dim(&self) -> usize {
        self.feature_names().len()
    }
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self::perceptron()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    /// `rows × cols`, one row per sample.
    pub values: Array2<f64>,
    pub names: Vec<String>,
}

impl FeatureMatrix {
    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.names.iter().position(|n| n == name)?;
        Some(self.values.column(j).to_vec())
    }

    /// Debug dump with a header of feature names.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "{}", self.names.join(",")).map_err(io)?;
        for row in self.values.rows() {
            let line: Vec<String> = row.iter().map(f64::to_string).collect();
            writeln!(w, "{}", line.join(",")).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Filters designed once for a feature configuration and sample rate.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    config: FeatureConfig,
    bandpass: BiquadCascade,
    smoothing: BiquadCascade,
    sample_rate: u32,
    names: Vec<String>,
}

impl FeatureExtractor {
    pub fn new(config: FeatureConfig, sample_rate: u32) -> Result<Self> {
        let (lo, hi) = config.bandpass_hz;
        let bandpass = signal::design_butterworth(
            FilterKind::Bandpass,
            &[lo, hi],
            config.bandpass_order,
            sample_rate,
        )?;
        let smoothing = signal::design_butterworth(
            FilterKind::Lowpass,
            &[config.orientation_lowpass_hz],
            2,
            sample_rate,
        )?;
        let names = config.feature_names();
        if names.is_empty() {
            return Err(Error::Config(
                "feature configuration selects no columns".into(),
            ));
        }
        Ok(Self {
            config,
            bandpass,
            smoothing,
            sample_rate,
            names,
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn extract(&self, step: &Step) -> Result<FeatureMatrix> {
        if step.sample_rate != self.sample_rate {
            return Err(Error::invalid(format!(
                "step sampled at {} Hz, extractor built for {} Hz",
                step.sample_rate, self.sample_rate
            )));
        }
        let n = step.len();
        if n < 2 {
            return Err(Error::invalid("step window shorter than two samples"));
        }
        let mut columns: Vec<Vec<f64>> = Vec::with_capacity(self.names.len());

        let band = |t: &Triaxial| -> Result<[Vec<f64>; 4]> {
            let x = signal::zero_phase_slice(&t.x, &self.bandpass)?;
            let y = signal::zero_phase_slice(&t.y, &self.bandpass)?;
            let z = signal::zero_phase_slice(&t.z, &self.bandpass)?;
            let total = signal::resultant_slice(&x, &y, &z);
            Ok([x, y, z, total])
        };
        let filtered = [band(&step.left)?, band(&step.right)?];

        if self.config.filtered_acc {
            for side in &filtered {
                columns.extend(side.iter().cloned());
            }
        }
        if self.config.jerk {
            for side in &filtered {
                for ch in side {
                    columns.push(signal::derivative_slice(ch, self.sample_rate)?);
                }
            }
        }
        if self.config.orientation {
            let mut rolls = Vec::with_capacity(2);
            let mut pitches = Vec::with_capacity(2);
            for t in [&step.left, &step.right] {
                let x = signal::zero_phase_slice(&t.x, &self.smoothing)?;
                let y = signal::zero_phase_slice(&t.y, &self.smoothing)?;
                let z = signal::zero_phase_slice(&t.z, &self.smoothing)?;
                let (r, p) = signal::attitude(&x, &y, &z);
                rolls.push(r);
                pitches.push(p);
            }
            columns.extend(rolls);
            columns.extend(pitches);
        }
        if self.config.peak_min {
            let right_x = &filtered[1][0];
            columns.push(signal::peak_min_label_slice(
                right_x,
                self.config.peak_window,
            )?);
        }

        let d = columns.len();
        let mut values = Array2::<f64>::zeros((n, d));
        for (j, col) in columns.iter().enumerate() {
            for (i, v) in signal::standardize_slice(col).into_iter().enumerate() {
                values[[i, j]] = v;
            }
        }
        Ok(FeatureMatrix {
            values,
            names: self.names.clone(),
        })
    }
}

/// One-shot convenience wrapper around [`FeatureExtractor`].
pub fn build_features(step: &Step, config: &FeatureConfig) -> Result<FeatureMatrix> {
    FeatureExtractor::new(config.clone(), step.sample_rate)?.extract(step)
}
