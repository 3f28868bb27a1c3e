//! Result rows and their CSV/JSON encodings.

use std::io::Write;

use anyhow::Result;
use clap::ValueEnum;
use extremum_tde::{BoundReport, ErrorRateEstimate, ModelParams};
use serde::{Deserialize, Serialize};

pub const COLUMNS: [&str; 11] = [
    "kind",
    "estimator",
    "k",
    "snr_db",
    "d_max",
    "trials",
    "errors",
    "p_hat",
    "ci_low",
    "ci_high",
    "seed",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Sim,
    Bound,
    Fit,
}

impl Kind {
    fn tag(self) -> &'static str {
        match self {
            Kind::Sim => "sim",
            Kind::Bound => "bound",
            Kind::Fit => "fit",
        }
    }
}

/// One output record. `None` fields are empty in CSV and `null` in JSON.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub kind: Kind,
    pub estimator: String,
    pub k: Option<u32>,
    pub snr_db: Option<f64>,
    pub d_max: Option<u32>,
    pub trials: Option<u64>,
    pub errors: Option<u64>,
    pub p_hat: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub seed: Option<u64>,
}

impl Row {
    fn blank(kind: Kind, estimator: &str) -> Self {
        Self {
            kind,
            estimator: estimator.to_string(),
            k: None,
            snr_db: None,
            d_max: None,
            trials: None,
            errors: None,
            p_hat: None,
            ci_low: None,
            ci_high: None,
            seed: None,
        }
    }

    pub fn sim(params: &ModelParams, est: &ErrorRateEstimate, seed: u64) -> Self {
        Self {
            k: Some(params.k),
            snr_db: Some(params.snr_db),
            d_max: Some(params.d_max),
            trials: Some(est.trials),
            errors: Some(est.errors),
            p_hat: Some(est.p_hat),
            ci_low: Some(est.ci_low),
            ci_high: Some(est.ci_high),
            seed: Some(seed),
            ..Self::blank(Kind::Sim, est.estimator.tag())
        }
    }

    pub fn bound(params: &ModelParams, name: &str, value: Option<f64>) -> Self {
        Self {
            k: Some(params.k),
            snr_db: Some(params.snr_db),
            d_max: Some(params.d_max),
            p_hat: value,
            ..Self::blank(Kind::Bound, name)
        }
    }

    /// `bound_upper` (clamped to 1) and `bound_lower` for a sweep point.
    pub fn bound_pair(params: &ModelParams, bounds: Option<&BoundReport>) -> [Self; 2] {
        [
            Self::bound(params, "bound_upper", bounds.map(|b| b.upper_clamped)),
            Self::bound(params, "bound_lower", bounds.map(|b| b.lower)),
        ]
    }

    pub fn fit(estimator: &str, snr_db: f64, d_max: u32, c_hat: Option<f64>, seed: u64) -> Self {
        Self {
            snr_db: Some(snr_db),
            d_max: Some(d_max),
            p_hat: c_hat,
            seed: Some(seed),
            ..Self::blank(Kind::Fit, estimator)
        }
    }

    fn csv_fields(&self) -> [String; 11] {
        fn int<T: ToString>(v: Option<T>) -> String {
            v.map(|v| v.to_string()).unwrap_or_default()
        }
        fn float(v: Option<f64>) -> String {
            v.map(format_float).unwrap_or_default()
        }
        [
            self.kind.tag().to_string(),
            self.estimator.clone(),
            int(self.k),
            float(self.snr_db),
            int(self.d_max),
            int(self.trials),
            int(self.errors),
            float(self.p_hat),
            float(self.ci_low),
            float(self.ci_high),
            int(self.seed),
        ]
    }

    /// The row as JSON, with every float rounded exactly as in CSV.
    fn to_json(&self) -> serde_json::Value {
        let mut row = self.clone();
        for v in [
            &mut row.snr_db,
            &mut row.p_hat,
            &mut row.ci_low,
            &mut row.ci_high,
        ] {
            *v = v.and_then(|x| {
                format_float(x)
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
            });
        }
        serde_json::to_value(row).expect("row serializes")
    }
}

/// Nine significant digits in scientific notation.
pub fn format_float(v: f64) -> String {
    format!("{v:.8e}")
}

pub fn write_rows<W: Write>(rows: &[Row], format: Format, out: W) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(COLUMNS)?;
            for r in rows {
                w.write_record(r.csv_fields())?;
            }
            w.flush()?;
        }
        Format::Json => {
            let mut out = out;
            let values: Vec<_> = rows.iter().map(Row::to_json).collect();
            serde_json::to_writer_pretty(&mut out, &serde_json::json!({ "rows": values }))?;
            writeln!(out)?;
        }
    }
    Ok(())
}
