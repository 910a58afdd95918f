use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use plotters::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentKind};
use crate::{Error, Result};

/// Curve identifier in result files.
///
/// `trtr`, `sp_n1_0` and `sp_n1_k` are the estimators (or their rates in the
/// purely analytic experiments); `reference_*` rows are theory curves for
/// the corresponding estimator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Trtr,
    #[serde(rename = "sp_n1_0")]
    SpN1Zero,
    #[serde(rename = "sp_n1_k")]
    SpN1K,
    ReferenceTrtr,
    ReferenceTrtrFinite,
    #[serde(rename = "reference_sp_n1_0")]
    ReferenceSpN1Zero,
    #[serde(rename = "reference_sp_n1_k")]
    ReferenceSpN1K,
    UpperBound,
    ReferenceTest,
    TrtrGap,
    SpDistance,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Trtr => "trtr",
            Method::SpN1Zero => "sp_n1_0",
            Method::SpN1K => "sp_n1_k",
            Method::ReferenceTrtr => "reference_trtr",
            Method::ReferenceTrtrFinite => "reference_trtr_finite",
            Method::ReferenceSpN1Zero => "reference_sp_n1_0",
            Method::ReferenceSpN1K => "reference_sp_n1_k",
            Method::UpperBound => "upper_bound",
            Method::ReferenceTest => "reference_test",
            Method::TrtrGap => "trtr_gap",
            Method::SpDistance => "sp_distance",
        }
    }

    pub fn is_reference(self) -> bool {
        matches!(
            self,
            Method::ReferenceTrtr
                | Method::ReferenceTrtrFinite
                | Method::ReferenceSpN1Zero
                | Method::ReferenceSpN1K
                | Method::UpperBound
                | Method::ReferenceTest
        )
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: ExperimentKind,
    /// Grid value: `T`, `γ` or `λ` depending on the experiment.
    pub coordinate: f64,
    pub method: Method,
    pub value: f64,
    pub stderr: f64,
    pub replicates: usize,
}

/// Orders rows by method, then coordinate.
pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        (a.experiment, a.method)
            .cmp(&(b.experiment, b.method))
            .then(a.coordinate.total_cmp(&b.coordinate))
    });
}

fn check_rows(rows: &[ResultRow]) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::EmptyResults);
    }
    for r in rows {
        if !r.value.is_finite() || !r.coordinate.is_finite() {
            return Err(Error::NonFinite("result row"));
        }
        if !(r.stderr >= 0.0 && r.stderr.is_finite()) {
            return Err(Error::NonFinite("result row stderr"));
        }
    }
    Ok(())
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
        }
        _ => Ok(()),
    }
}

/// Writes `experiment,coordinate,method,value,stderr,replicates` rows with
/// shortest round-trip float formatting and LF line endings.
pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    check_rows(rows)?;
    create_parent(path)?;
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Echoes the resolved configuration next to the results.
pub fn emit_metadata(config: &ExperimentConfig, path: &Path) -> Result<()> {
    create_parent(path)?;
    let text = config.to_toml_string()?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn chart_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Chart(e.to_string())
}

fn x_label(experiment: ExperimentKind) -> &'static str {
    match experiment {
        ExperimentKind::FigB | ExperimentKind::Counterexample => "T (tasks)",
        ExperimentKind::FigA | ExperimentKind::FigC => "gamma = d/n",
        ExperimentKind::Rates => "lambda",
    }
}

/// Static SVG with one line series per method. With `log_scale` the vertical
/// axis shows `log10(value)` and non-positive values are dropped.
pub fn emit_chart(rows: &[ResultRow], path: &Path, log_scale: bool) -> Result<()> {
    check_rows(rows)?;
    create_parent(path)?;
    let mut series: BTreeMap<Method, Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows {
        let y = if log_scale {
            if r.value <= 0.0 {
                continue;
            }
            r.value.log10()
        } else {
            r.value
        };
        series.entry(r.method).or_default().push((r.coordinate, y));
    }
    for pts in series.values_mut() {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    let all = series.values().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x0 > x1 {
        return Err(Error::Chart(
            "no positive values to draw on a log axis".into(),
        ));
    }
    let pad = |lo: f64, hi: f64| {
        let span = (hi - lo).abs().max(1e-9 * lo.abs().max(1.0));
        (lo - 0.05 * span, hi + 0.05 * span)
    };
    let (x0, x1) = pad(x0, x1);
    let (y0, y1) = pad(y0, y1);

    let experiment = rows[0].experiment;
    let root = SVGBackend::new(path, (960, 640)).into_drawing_area();
    root.fill(&WHITE).map_err(chart_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(experiment.as_str(), ("sans-serif", 24))
        .margin(20)
        .x_label_area_size(45)
        .y_label_area_size(70)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(chart_err)?;
    chart
        .configure_mesh()
        .x_desc(x_label(experiment))
        .y_desc(if log_scale { "log10(value)" } else { "value" })
        .draw()
        .map_err(chart_err)?;
    for (i, (method, pts)) in series.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        let style = if method.is_reference() {
            color.stroke_width(1)
        } else {
            color.stroke_width(2)
        };
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), style))
            .map_err(chart_err)?
            .label(method.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
        if !method.is_reference() {
            chart
                .draw_series(pts.iter().map(|&p| Circle::new(p, 3, color.filled())))
                .map_err(chart_err)?;
        }
    }
    chart
        .configure_series_labels()
        .border_style(BLACK)
        .background_style(WHITE.mix(0.85))
        .draw()
        .map_err(chart_err)?;
    root.present().map_err(chart_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<ResultRow> {
        vec![
            ResultRow {
                experiment: ExperimentKind::FigB,
                coordinate: 20.0,
                method: Method::SpN1Zero,
                value: 0.1 + 0.2,
                stderr: 1.0 / 3.0,
                replicates: 50,
            },
            ResultRow {
                experiment: ExperimentKind::FigB,
                coordinate: 40.0,
                method: Method::ReferenceSpN1Zero,
                value: 4.05 / 40.0,
                stderr: 0.0,
                replicates: 1,
            },
        ]
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/out.csv");
        emit_csv(&rows(), &path).unwrap();
        assert_eq!(read_csv(&path).unwrap(), rows());
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("experiment,coordinate,method,value,stderr,replicates\n"));
        assert!(!text.contains('\r'));
        assert!(text.contains("fig_b,20.0,sp_n1_0,0.30000000000000004,"));
    }

    #[test]
    fn empty_rows_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            emit_csv(&[], &dir.path().join("x.csv")),
            Err(Error::EmptyResults)
        ));
        assert!(matches!(
            emit_chart(&[], &dir.path().join("x.svg"), false),
            Err(Error::EmptyResults)
        ));
    }

    #[test]
    fn chart_is_svg() {
        let dir = tempfile::tempdir().unwrap();
        for log in [false, true] {
            let path = dir.path().join(format!("c{log}.svg"));
            emit_chart(&rows(), &path, log).unwrap();
            let text = fs::read_to_string(&path).unwrap();
            assert!(text.contains("<svg"));
            assert!(text.contains("sp_n1_0"));
        }
    }

    #[test]
    fn unwritable_path() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("f");
        fs::write(&file, "x").unwrap();
        assert!(emit_csv(&rows(), &file.join("out.csv")).is_err());
    }
}
