//! Two-component principal-axis projection with CSV and SVG export.

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// `n x 2` projected rows.
    pub scores: Array2<f64>,
    /// `2 x M` unit loadings.
    pub components: Array2<f64>,
    pub mean: Array1<f64>,
    /// Share of total variance carried by each component.
    pub explained: [f64; 2],
    /// The data spans fewer than two directions; missing components are zero.
    pub rank_deficient: bool,
}

const RANK_TOL: f64 = 1e-10;

pub fn project_2d(features: ArrayView2<f64>) -> Result<Projection> {
    let (n, m) = features.dim();
    if n < 2 || m < 2 {
        return Err(Error::InvalidArgument(format!(
            "projection needs at least 2 rows and 2 features, got {n} x {m}"
        )));
    }
    if !features.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("projection input".into()));
    }
    let mean = features.mean_axis(Axis(0)).expect("non-empty");
    let centered = &features - &mean;
    let cov = centered.t().dot(&centered) / (n - 1) as f64;
    let eig = SymmetricEigen::new(DMatrix::from_fn(m, m, |i, j| cov[[i, j]]));
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let scale = eig.eigenvalues[order[0]].abs().max(1.0);
    let mut components = Array2::zeros((2, m));
    let mut explained = [0.0; 2];
    let mut rank_deficient = false;
    for (c, &k) in order.iter().take(2).enumerate() {
        let value = eig.eigenvalues[k];
        if value <= RANK_TOL * scale {
            rank_deficient = true;
            continue;
        }
        let v = eig.eigenvectors.column(k);
        let lead = (0..m).fold(0, |best, i| if v[i].abs() > v[best].abs() + 1e-12 { i } else { best });
        let sign = if v[lead] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..m {
            components[[c, i]] = sign * v[i];
        }
        explained[c] = if total > 0.0 { value / total } else { 0.0 };
    }
    let scores = centered.dot(&components.t());
    Ok(Projection {
        scores,
        components,
        mean,
        explained,
        rank_deficient,
    })
}

impl Projection {
    /// Back to feature space from the two scores.
    pub fn reconstruct(&self) -> Array2<f64> {
        self.scores.dot(&self.components) + &self.mean
    }

    pub fn to_csv(&self, labels: Option<&[usize]>) -> String {
        let mut out = String::from(if labels.is_some() { "pc1,pc2,state\n" } else { "pc1,pc2\n" });
        for (i, row) in self.scores.axis_iter(Axis(0)).enumerate() {
            match labels {
                Some(l) => writeln!(out, "{:?},{:?},{}", row[0], row[1], l[i]).unwrap(),
                None => writeln!(out, "{:?},{:?}", row[0], row[1]).unwrap(),
            }
        }
        out
    }

    /// Scatter plot, points colored by label.
    pub fn to_svg(&self, labels: Option<&[usize]>) -> String {
        const W: f64 = 640.0;
        const H: f64 = 480.0;
        const PAD: f64 = 40.0;
        let xs = self.scores.column(0);
        let ys = self.scores.column(1);
        let range = |v: ndarray::ArrayView1<f64>| {
            let lo = v.fold(f64::INFINITY, |a, &b| a.min(b));
            let hi = v.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            if hi - lo < 1e-12 {
                (lo - 1.0, hi + 1.0)
            } else {
                (lo, hi)
            }
        };
        let (x0, x1) = range(xs);
        let (y0, y1) = range(ys);
        let mut svg = String::new();
        writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
        )
        .unwrap();
        writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
        writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">PC1 ({:.1}%)</text>"#,
            W / 2.0,
            H - 10.0,
            100.0 * self.explained[0]
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="12" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 12 {})">PC2 ({:.1}%)</text>"#,
            H / 2.0,
            H / 2.0,
            100.0 * self.explained[1]
        )
        .unwrap();
        for i in 0..self.scores.nrows() {
            let px = PAD + (xs[i] - x0) / (x1 - x0) * (W - 2.0 * PAD);
            let py = H - PAD - (ys[i] - y0) / (y1 - y0) * (H - 2.0 * PAD);
            let label = labels.map_or(0, |l| l[i]);
            let hue = (label * 137) % 360;
            writeln!(
                svg,
                r#"<circle cx="{px:.2}" cy="{py:.2}" r="2" fill="hsl({hue},70%,45%)" fill-opacity="0.6"/>"#
            )
            .unwrap();
        }
        svg.push_str("</svg>\n");
        svg
    }
}
