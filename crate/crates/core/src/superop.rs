//! Time-averaged moment equations of the quantum tangent space on a banded
//! truncation `|n − n′| ≤ B`, `|n − n₀| ≤ W`.
//!
//! Entries are indexed by `(n, Z = n′ − n)`. The antisymmetric moment is
//! purely imaginary and is stored through its imaginary part, `F^asym = iA`,
//! which turns the system into the real one
//!
//! ```text
//! dF^NN/dt  = (ε̃/4)(V_n + V_n′)² (F^ΘΘ_{n,n′+1} + F^ΘΘ_{n+1,n′})
//! dF^ΘΘ/dt  = 2 l F^sym
//! dF^sym/dt = l F^NN + j A
//! dA/dt     = −j F^sym
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{spectrum_curvature, torus_frequency, Lattice, ModelSpec};

/// Largest allowed `dt · max(|j|, λ)`.
pub const STEP_LIMIT: f64 = 0.05;
/// Largest allowed fraction of mass lost through the band edges.
pub const LEAKAGE_LIMIT: f64 = 1e-6;

/// `j`, `l` and `(V_n + V_n′)²` on the band.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    pub n0: i64,
    pub band: usize,
    pub window: usize,
    pub gamma: f64,
    pub mu: f64,
    pub j: Vec<f64>,
    pub l: Vec<f64>,
    pub drive: Vec<f64>,
}

impl CoefficientField {
    pub fn width(&self) -> usize {
        2 * self.band + 1
    }

    pub fn rows(&self) -> usize {
        2 * self.window + 1
    }

    pub fn len(&self) -> usize {
        self.rows() * self.width()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn first_row(&self) -> i64 {
        self.n0 - self.window as i64
    }

    /// Flat index of `(n, n′)`, if inside the band.
    pub fn index(&self, n: i64, n_prime: i64) -> Option<usize> {
        let i = n - self.first_row();
        let k = n_prime - n + self.band as i64;
        if i < 0 || i >= self.rows() as i64 || k < 0 || k >= self.width() as i64 {
            None
        } else {
            Some(i as usize * self.width() + k as usize)
        }
    }

    /// `(n, n′)` of a flat index.
    pub fn levels(&self, idx: usize) -> (i64, i64) {
        let n = self.first_row() + (idx / self.width()) as i64;
        (n, n + (idx % self.width()) as i64 - self.band as i64)
    }

    pub fn j_at(&self, n: i64, n_prime: i64) -> Option<f64> {
        self.index(n, n_prime).map(|i| self.j[i])
    }

    pub fn l_at(&self, n: i64, n_prime: i64) -> Option<f64> {
        self.index(n, n_prime).map(|i| self.l[i])
    }

    pub fn max_abs_j(&self) -> f64 {
        self.j.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Same field with the oscillating `j` terms removed.
    pub fn without_oscillation(&self) -> Self {
        let mut c = self.clone();
        c.j.iter_mut().for_each(|x| *x = 0.0);
        c
    }

    fn drive_coefficient(&self, n: i64, n_prime: i64) -> f64 {
        let v = |x: i64| (x.unsigned_abs() as f64).powf(self.mu);
        (v(n) + v(n_prime)).powi(2)
    }
}

/// Fills `j(n,n′) = ω_n − ω_n′`, `l(n,n′) = j/(n − n′)` (the curvature on
/// the diagonal) and `(V_n + V_n′)²` with `V_n = n^μ`.
pub fn build_coefficients(spec: &ModelSpec, band: usize, window: usize) -> Result<CoefficientField> {
    spec.validate()?;
    if band < 1 || window < 1 {
        return Err(Error::InvalidInput("band and window must both be at least 1".into()));
    }
    let reach = (band + window + 1) as i64;
    let lo = spec.n0 - reach;
    let hi = spec.n0 + reach;
    let lowest = match spec.lattice {
        Lattice::HalfLine { .. } => 1,
        Lattice::Symmetric { .. } => spec.lattice.first_level(),
    };
    if lo < lowest || hi > spec.lattice.last_level() {
        return Err(Error::InvalidModel(format!(
            "moment window [{lo}, {hi}] around n0 = {} touches the lattice edge",
            spec.n0
        )));
    }
    let mut c = CoefficientField {
        n0: spec.n0,
        band,
        window,
        gamma: spec.gamma,
        mu: spec.mu,
        j: Vec::new(),
        l: Vec::new(),
        drive: Vec::new(),
    };
    let len = c.len();
    c.j.reserve(len);
    c.l.reserve(len);
    c.drive.reserve(len);
    for idx in 0..len {
        let (n, np) = c.levels(idx);
        let j = torus_frequency(spec.gamma, n) - torus_frequency(spec.gamma, np);
        let l = if n == np { spectrum_curvature(spec.gamma, n as f64) } else { j / (n - np) as f64 };
        c.j.push(j);
        c.l.push(l);
        c.drive.push(c.drive_coefficient(n, np));
    }
    Ok(c)
}

/// The four moment arrays on the band. `asym` holds `A` with `F^asym = iA`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentField {
    pub nn: Vec<f64>,
    pub tt: Vec<f64>,
    pub sym: Vec<f64>,
    pub asym: Vec<f64>,
}

impl MomentField {
    pub fn zeros(len: usize) -> Self {
        MomentField { nn: vec![0.0; len], tt: vec![0.0; len], sym: vec![0.0; len], asym: vec![0.0; len] }
    }

    pub fn tt_trace(&self, c: &CoefficientField) -> f64 {
        (0..c.rows()).map(|i| self.tt[i * c.width() + c.band]).sum()
    }

    pub fn tt_total(&self) -> f64 {
        self.tt.iter().sum()
    }

    pub fn nn_total(&self) -> f64 {
        self.nn.iter().sum()
    }

    /// `Σ_n′ F^ΘΘ_{n,n′}`.
    pub fn tt_row(&self, c: &CoefficientField, n: i64) -> f64 {
        let i = (n - c.first_row()) as usize;
        self.tt[i * c.width()..(i + 1) * c.width()].iter().sum()
    }
}

/// `F^ΘΘ = 1` at `(n₀, n₀)` and `(n₀+1, n₀+1)`, everything else zero.
pub fn initial_moments(c: &CoefficientField) -> MomentField {
    let mut f = MomentField::zeros(c.len());
    for n in [c.n0, c.n0 + 1] {
        f.tt[c.index(n, n).expect("window holds n0 and n0 + 1")] = 1.0;
    }
    f
}

/// Growth estimate from the third-order equation for one entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThirdOrder {
    /// `λ` with `(2λ)³ = ε̃ l² (V_n + V_n′)²`, the rate when the `j` term is
    /// negligible and the neighbors carry the same weight.
    pub growth_rate: f64,
    /// `|j(n,n′)| / λ`.
    pub j_term_ratio: f64,
}

pub fn third_order_diagnostic(c: &CoefficientField, eps_tilde: f64, n: i64, n_prime: i64) -> Result<ThirdOrder> {
    let idx = c
        .index(n, n_prime)
        .ok_or_else(|| Error::InvalidInput(format!("({n}, {n_prime}) is outside the band")))?;
    let l = c.l[idx];
    let growth_rate = 0.5 * (eps_tilde * l * l * c.drive[idx]).cbrt();
    let j = c.j[idx].abs();
    let j_term_ratio = if growth_rate > 0.0 {
        j / growth_rate
    } else if j == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(ThirdOrder { growth_rate, j_term_ratio })
}

/// Recorded output of [`integrate_moments`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSeries {
    pub times: Vec<f64>,
    /// `Σ_n F^ΘΘ_{n,n}`.
    pub tt_trace: Vec<f64>,
    /// `Σ F^ΘΘ` over the band.
    pub tt_total: Vec<f64>,
    /// `Σ_n′ F^ΘΘ_{n₀,n′}`.
    pub tt_row_n0: Vec<f64>,
    pub nn_total: Vec<f64>,
    /// Mass that left the band, as a fraction of the final total.
    pub leakage_fraction: f64,
    pub final_field: MomentField,
}

/// Fixed-step RK4 integration from `init` to `t_end`, recording every
/// `record_every` steps (and the final state).
pub fn integrate_moments(
    c: &CoefficientField,
    init: &MomentField,
    eps_tilde: f64,
    t_end: f64,
    dt: f64,
    record_every: usize,
) -> Result<MomentSeries> {
    if !(dt > 0.0) || !(t_end >= 0.0) || record_every == 0 {
        return Err(Error::InvalidInput("need dt > 0, t_end >= 0 and record_every >= 1".into()));
    }
    if init.tt.len() != c.len() {
        return Err(Error::InvalidInput("moment field does not match the band".into()));
    }
    let lambda = third_order_diagnostic(c, eps_tilde, c.n0, c.n0)?.growth_rate;
    let product = dt * c.max_abs_j().max(lambda);
    if product >= STEP_LIMIT {
        return Err(Error::StepTooCoarse { product, limit: STEP_LIMIT });
    }

    let len = c.len();
    let steps = (t_end / dt).round() as usize;
    let mut y = pack(init);
    let mut k = [vec![0.0; 4 * len], vec![0.0; 4 * len], vec![0.0; 4 * len], vec![0.0; 4 * len]];
    let mut tmp = vec![0.0; 4 * len];
    let leak = leak_rates(c, eps_tilde);
    let mut leaked = 0.0;
    let mut out = MomentSeries {
        times: Vec::new(),
        tt_trace: Vec::new(),
        tt_total: Vec::new(),
        tt_row_n0: Vec::new(),
        nn_total: Vec::new(),
        leakage_fraction: 0.0,
        final_field: init.clone(),
    };
    let record = |y: &[f64], t: f64, out: &mut MomentSeries| {
        let f = unpack(y, len);
        out.times.push(t);
        out.tt_trace.push(f.tt_trace(c));
        out.tt_total.push(f.tt_total());
        out.tt_row_n0.push(f.tt_row(c, c.n0));
        out.nn_total.push(f.nn_total());
    };
    record(&y, 0.0, &mut out);
    for step in 1..=steps {
        leaked += dt * y[len..2 * len].iter().zip(&leak).map(|(t, r)| t * r).sum::<f64>();
        rhs(c, eps_tilde, &y, &mut k[0]);
        for s in 1..4 {
            let h = if s == 3 { dt } else { 0.5 * dt };
            let (prev, rest) = k.split_at_mut(s);
            for ((t, yi), ki) in tmp.iter_mut().zip(&y).zip(&prev[s - 1]) {
                *t = yi + h * ki;
            }
            rhs(c, eps_tilde, &tmp, &mut rest[0]);
        }
        for i in 0..4 * len {
            y[i] += dt / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
        }
        if step % record_every == 0 || step == steps {
            if !y.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite { what: "moment field", step });
            }
            record(&y, step as f64 * dt, &mut out);
        }
    }
    let f = unpack(&y, len);
    let total = f.tt_total() + f.nn_total();
    out.leakage_fraction = if total > 0.0 { leaked / total } else { 0.0 };
    out.final_field = f;
    if out.leakage_fraction > LEAKAGE_LIMIT {
        return Err(Error::BandLeakage { fraction: out.leakage_fraction, limit: LEAKAGE_LIMIT });
    }
    Ok(out)
}

fn pack(f: &MomentField) -> Vec<f64> {
    [&f.nn[..], &f.tt[..], &f.sym[..], &f.asym[..]].concat()
}

fn unpack(y: &[f64], len: usize) -> MomentField {
    MomentField {
        nn: y[..len].to_vec(),
        tt: y[len..2 * len].to_vec(),
        sym: y[2 * len..3 * len].to_vec(),
        asym: y[3 * len..].to_vec(),
    }
}

fn rhs(c: &CoefficientField, eps_tilde: f64, y: &[f64], dy: &mut [f64]) {
    let len = c.len();
    let (nn, rest) = y.split_at(len);
    let (tt, rest) = rest.split_at(len);
    let (sym, asym) = rest.split_at(len);
    let (dnn, drest) = dy.split_at_mut(len);
    let (dtt, drest) = drest.split_at_mut(len);
    let (dsym, dasym) = drest.split_at_mut(len);
    let w = c.width();
    let rows = c.rows();
    let e4 = eps_tilde / 4.0;
    for i in 0..rows {
        for k in 0..w {
            let idx = i * w + k;
            // F^ΘΘ_{n,n′+1} is (i, k+1); F^ΘΘ_{n+1,n′} is (i+1, k−1).
            let mut src = 0.0;
            if k + 1 < w {
                src += tt[idx + 1];
            }
            if i + 1 < rows && k > 0 {
                src += tt[idx + w - 1];
            }
            dnn[idx] = e4 * c.drive[idx] * src;
            dtt[idx] = 2.0 * c.l[idx] * sym[idx];
            dsym[idx] = c.l[idx] * nn[idx] + c.j[idx] * asym[idx];
            dasym[idx] = -c.j[idx] * sym[idx];
        }
    }
}

/// Per-entry rate at which `F^ΘΘ` feeds `F^NN` entries outside the band.
fn leak_rates(c: &CoefficientField, eps_tilde: f64) -> Vec<f64> {
    let e4 = eps_tilde / 4.0;
    (0..c.len())
        .map(|idx| {
            let (n, np) = c.levels(idx);
            // An entry (n, n′) drives (n, n′−1) and (n−1, n′).
            [(n, np - 1), (n - 1, np)]
                .into_iter()
                .filter(|&(a, b)| c.index(a, b).is_none())
                .map(|(a, b)| e4 * c.drive_coefficient(a, b))
                .sum()
        })
        .collect()
}
