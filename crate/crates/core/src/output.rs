//! Deterministic CSV emission.
//!
//! Floats are written in scientific notation with 17 significant digits,
//! so every value reads back bit-exactly. Lines end in `\n`.

use std::fs;
use std::path::Path;

use crate::analysis::{PolaritonReport, ScanRow, SpectrumData, State};
use crate::disorder::{EnsembleStats, Histogram};
use crate::units::hartree_to_ev;
use crate::{Error, Result};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Csv { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render()).map_err(Error::file(path))
    }
}

pub const SCAN_HEADER: [&str; 13] = [
    "n",
    "d_angstrom",
    "lambda",
    "e_lp",
    "e_mp",
    "e_up",
    "gap",
    "c_p",
    "c_a1",
    "c_a2",
    "photon_char_lp",
    "photon_char_mp",
    "n_star_flag",
];

fn scan_fields(r: &ScanRow) -> Vec<String> {
    let mut v = vec![r.n.to_string()];
    v.extend(
        [
            r.d_angstrom,
            r.lambda,
            r.e_lp,
            r.e_mp,
            r.e_up,
            r.gap,
            r.c_p,
            r.c_a1,
            r.c_a2,
            r.photon_char_lp,
            r.photon_char_mp,
        ]
        .map(fmt_f64),
    );
    v.push(r.n_star_flag.to_string());
    v
}

pub fn scan_csv(rows: &[ScanRow]) -> Csv {
    let mut csv = Csv::new(SCAN_HEADER);
    for r in rows {
        csv.push(scan_fields(r));
    }
    csv
}

pub fn eigenvalues_csv(report: &PolaritonReport) -> Csv {
    let mut csv = Csv::new(["index", "energy_hartree", "energy_ev", "photon_character", "oscillator_strength"]);
    for (i, s) in report.all_states().iter().enumerate() {
        csv.push(vec![
            i.to_string(),
            fmt_f64(s.energy),
            fmt_f64(hartree_to_ev(s.energy)),
            fmt_f64(s.photon_character),
            fmt_f64(s.oscillator_strength),
        ]);
    }
    csv
}

/// One row per state (branches first), with gauge-fixed coefficients in
/// basis order.
pub fn report_csv(report: &PolaritonReport) -> Csv {
    let mut header: Vec<String> = [
        "state",
        "energy_hartree",
        "energy_ev",
        "photon_character",
        "oscillator_strength",
        "fallback_gauge",
    ]
    .map(String::from)
    .to_vec();
    header.extend(report.labels.iter().map(|l| format!("c_{l}")));
    let mut csv = Csv::new(header);
    let mut push = |name: &str, s: &State| {
        let mut row = vec![
            name.to_string(),
            fmt_f64(s.energy),
            fmt_f64(hartree_to_ev(s.energy)),
            fmt_f64(s.photon_character),
            fmt_f64(s.oscillator_strength),
            u8::from(s.fallback_gauge).to_string(),
        ];
        row.extend(s.coefficients.iter().map(|&c| fmt_f64(c)));
        csv.push(row);
    };
    push("lp", &report.lp);
    if let Some(mp) = &report.mp {
        push("mp", mp);
    }
    push("up", &report.up);
    for s in &report.dark_states {
        push("dark", s);
    }
    csv
}

pub fn sticks_csv(s: &SpectrumData) -> Csv {
    let mut csv = Csv::new(["energy_hartree", "energy_ev", "oscillator_strength"]);
    for (&e, &f) in s.stick_energies.iter().zip(&s.stick_intensities) {
        csv.push(vec![fmt_f64(e), fmt_f64(hartree_to_ev(e)), fmt_f64(f)]);
    }
    csv
}

pub fn broadened_csv(s: &SpectrumData) -> Csv {
    let mut csv = Csv::new(["energy_hartree", "energy_ev", "intensity"]);
    for &(e, y) in &s.grid {
        csv.push(vec![fmt_f64(e), fmt_f64(hartree_to_ev(e)), fmt_f64(y)]);
    }
    csv
}

pub fn disorder_samples_csv(stats: &EnsembleStats) -> Csv {
    let mut header = vec!["stream".to_string()];
    header.extend(SCAN_HEADER.map(String::from));
    let mut csv = Csv::new(header);
    for s in &stats.samples {
        let mut row = vec![s.stream_index.to_string()];
        row.extend(scan_fields(&s.row));
        csv.push(row);
    }
    csv
}

pub fn disorder_aggregate_csv(stats: &EnsembleStats) -> Csv {
    let mut csv = Csv::new(["site", "lp_mean", "lp_std", "mp_mean", "mp_std"]);
    for i in 0..stats.lp_mean.len() {
        csv.push(vec![
            (i + 1).to_string(),
            fmt_f64(stats.lp_mean[i]),
            fmt_f64(stats.lp_std[i]),
            fmt_f64(stats.mp_mean[i]),
            fmt_f64(stats.mp_std[i]),
        ]);
    }
    csv
}

pub fn histograms_csv(stats: &EnsembleStats) -> Csv {
    let mut csv = Csv::new(["branch", "bin_lower", "bin_upper", "count"]);
    let mut push = |name: &str, h: &Histogram| {
        let edges = h.bin_edges();
        for (i, c) in h.counts.iter().enumerate() {
            csv.push(vec![name.to_string(), fmt_f64(edges[i]), fmt_f64(edges[i + 1]), c.to_string()]);
        }
    };
    push("lp", &stats.e_lp);
    push("mp", &stats.e_mp);
    push("up", &stats.e_up);
    csv
}
