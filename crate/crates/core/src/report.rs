//! Markdown summary and static SVG bar charts over a run directory.

use std::fmt::Write as _;
use std::path::Path;

use crate::defense::{DefenseReport, SweepRow, HISTOGRAM_HEADER, SWEEP_HEADER};
use crate::error::{Error, Result};
use crate::experiment::{read_grid_csv, ResultRow, VerifyRow, VERIFY_HEADER};

/// Artifacts found in a run directory.
#[derive(Clone, Debug, Default)]
pub struct RunArtifacts {
    pub grid: Option<Vec<ResultRow>>,
    pub defense: Option<DefenseReport>,
    pub sweep: Option<Vec<SweepRow>>,
    pub histogram: Option<Vec<(f64, f64, usize)>>,
    pub verify: Option<Vec<VerifyRow>>,
}

impl RunArtifacts {
    pub fn load(dir: &Path) -> Result<Self> {
        let open = |name: &str| -> Result<Option<std::fs::File>> {
            let p = dir.join(name);
            Ok(if p.exists() { Some(std::fs::File::open(p)?) } else { None })
        };
        Ok(Self {
            grid: open("grid.csv")?.map(read_grid_csv).transpose()?,
            defense: open("defense.json")?
                .map(|f| serde_json::from_reader(std::io::BufReader::new(f)))
                .transpose()?,
            sweep: open("sweep.csv")?.map(read_sweep).transpose()?,
            histogram: open("histogram.csv")?.map(read_histogram).transpose()?,
            verify: open("oracle.csv")?.map(read_verify).transpose()?,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_none()
            && self.defense.is_none()
            && self.sweep.is_none()
            && self.histogram.is_none()
            && self.verify.is_none()
    }
}

fn check_header<R: std::io::Read>(r: &mut csv::Reader<R>, expect: &str, what: &'static str) -> Result<()> {
    let got: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if got.join(",") != expect {
        return Err(Error::Format {
            what,
            detail: format!("unexpected header {got:?}"),
        });
    }
    Ok(())
}

fn read_sweep<R: std::io::Read>(reader: R) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(reader);
    check_header(&mut r, SWEEP_HEADER, "sweep csv")?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let f = |i: usize| -> Result<f64> {
            rec[i].parse().map_err(|_| Error::Format {
                what: "sweep csv",
                detail: format!("bad number {:?}", &rec[i]),
            })
        };
        let mut eval = crate::defense::EvalPair {
            test: Default::default(),
            attack: Default::default(),
        };
        eval.test.mse = f(2)?;
        eval.test.mae = f(3)?;
        eval.attack.mse = f(4)?;
        eval.attack.mae = f(5)?;
        eval.attack.success_band = f(6)?;
        rows.push(SweepRow {
            alpha: f(0)?,
            removal: &rec[1] == "true",
            eval,
        });
    }
    Ok(rows)
}

fn read_histogram<R: std::io::Read>(reader: R) -> Result<Vec<(f64, f64, usize)>> {
    let mut r = csv::Reader::from_reader(reader);
    check_header(&mut r, HISTOGRAM_HEADER, "histogram csv")?;
    r.deserialize().map(|x| x.map_err(Error::from)).collect()
}

fn read_verify<R: std::io::Read>(reader: R) -> Result<Vec<VerifyRow>> {
    let mut r = csv::Reader::from_reader(reader);
    check_header(&mut r, VERIFY_HEADER, "oracle csv")?;
    r.deserialize().map(|x| x.map_err(Error::from)).collect()
}

pub fn render_markdown(a: &RunArtifacts) -> String {
    let mut s = String::from("# Run report\n");
    if let Some(rows) = &a.verify {
        let bad = crate::experiment::verify_failure_rate(rows);
        let _ = writeln!(
            s,
            "\n## Oracle check\n\n{} points, {:.1}% beyond 3 standard errors.",
            rows.len(),
            100.0 * bad
        );
    }
    if let Some(rows) = &a.grid {
        s.push_str("\n## Attack grid\n\n| n_attack | n_clean | train MSE | test MSE | test MAE | attack y/z>1 | success |\n|---|---|---|---|---|---|---|\n");
        for r in rows {
            let _ = writeln!(
                s,
                "| {} | {} | {:.3e} | {:.3e} | {:.3e} | {:.4} | {:.4} |",
                r.n_attack, r.n_clean, r.train_mse, r.test_mse, r.test_mae, r.attack_over, r.attack_success
            );
        }
    }
    if let Some(d) = &a.defense {
        let b = &d.breakdown;
        let _ = writeln!(
            s,
            "\n## Detection\n\n{} maximizers, {} flagged (count >= {:.1}, error percentile >= {}).\n\
             Suspects: {} ({} of {} mislabeled, {} of {} localizing, {} clean). False positive rate {:.5}.",
            d.profiles.len(),
            d.flagged.len(),
            d.count_min,
            d.error_pct_min,
            d.suspects.len(),
            b.mislabeled_caught,
            b.mislabeled_total,
            b.localizing_caught,
            b.localizing_total,
            b.clean_caught,
            b.false_positive_rate,
        );
    }
    if let Some(rows) = &a.sweep {
        s.push_str("\n## Retraining sweep\n\n| alpha | removal | test MSE | attack MSE | attack MAE | success |\n|---|---|---|---|---|---|\n");
        for r in rows {
            let _ = writeln!(
                s,
                "| {} | {} | {:.3e} | {:.3e} | {:.3e} | {:.4} |",
                r.alpha, r.removal, r.eval.test.mse, r.eval.attack.mse, r.eval.attack.mae, r.eval.attack.success_band
            );
        }
    }
    s
}

/// Minimal vertical bar chart.
pub fn bar_chart_svg(title: &str, labels: &[String], values: &[f64]) -> String {
    let (w, h, pad) = (640.0, 360.0, 40.0);
    let max = values.iter().cloned().fold(0.0_f64, f64::max).max(f64::MIN_POSITIVE);
    let n = values.len().max(1) as f64;
    let slot = (w - 2.0 * pad) / n;
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"10\">\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        w / 2.0,
        escape(title)
    );
    for (i, (label, v)) in labels.iter().zip(values).enumerate() {
        let bh = (h - 2.0 * pad - 20.0) * v / max;
        let x = pad + i as f64 * slot + 0.1 * slot;
        let y = h - pad - bh;
        let _ = writeln!(
            s,
            "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{:.1}\" height=\"{bh:.1}\" fill=\"#4a78b0\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            0.8 * slot,
            x + 0.4 * slot,
            h - pad + 14.0,
            escape(label)
        );
    }
    let _ = writeln!(
        s,
        "<line x1=\"{pad}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n</svg>",
        h - pad,
        w - pad,
        h - pad
    );
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Charts available from the artifacts, as `(file name, svg)`.
pub fn render_svgs(a: &RunArtifacts) -> Vec<(String, String)> {
    let mut out = Vec::new();
    if let Some(h) = &a.histogram {
        let labels = h.iter().map(|(lo, _, _)| format!("{lo:.0}")).collect::<Vec<_>>();
        let values = h.iter().map(|b| b.2 as f64).collect::<Vec<_>>();
        out.push((
            "histogram.svg".into(),
            bar_chart_svg("Maximizers by proximal training samples", &labels, &values),
        ));
    }
    if let Some(rows) = &a.sweep {
        for removal in [false, true] {
            let sel: Vec<_> = rows.iter().filter(|r| r.removal == removal).collect();
            let labels = sel.iter().map(|r| r.alpha.to_string()).collect::<Vec<_>>();
            let values = sel.iter().map(|r| r.eval.attack.mse).collect::<Vec<_>>();
            let (name, title) = if removal {
                ("sweep_removal.svg", "Attack MSE by alpha, suspects removed")
            } else {
                ("sweep_plain.svg", "Attack MSE by alpha, suspects kept")
            };
            out.push((name.into(), bar_chart_svg(title, &labels, &values)));
        }
    }
    out
}
