//! Receivers for the index-modulation link: exhaustive ML, linear MMSE with
//! per-group index/symbol extraction, and the structured AMP (S-AMP) detector.
//!
//! S-AMP runs the damped AMP recursion with a structured prior that knows
//! exactly one port is active per group. Per iteration, for every observation
//! `r` and port `i`:
//!
//! ```text
//! V_r = Δ·Σ_i |H_ri|² v̂_i + (1−Δ)·V_r'                  (damped variance)
//! Z_r = Δ·[Σ_i H_ri x̂_i − V_r (y_r − Z_r')/(σ² + V_r')] + (1−Δ)·Z_r'
//! Σ_i = [Σ_r |H_ri|²/(σ² + V_r)]⁻¹
//! R_i = x̂_i + Σ_i Σ_r H_ri* (y_r − Z_r)/(σ² + V_r)
//! ```
//!
//! followed by the group-structured posterior over `x_i ∈ {0} ∪ 𝕊` whose
//! normalizer is shared by every port of a group (computed once per group,
//! keeping the iteration cost linear in `N`). All exponentials are evaluated
//! after subtracting the per-group maximum exponent, so overflow cannot occur
//! at any SNR.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::modem::{BitWord, Codec, Constellation, FagImCodec};

/// Hard ceiling on the ML candidate space.
pub const ML_CANDIDATE_CAP: u128 = 1 << 20;

/// Receiver selector, as named in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectorKind {
    Ml,
    Mmse,
    Samp,
}

impl DetectorKind {
    pub fn name(&self) -> &'static str {
        match self {
            DetectorKind::Ml => "ml",
            DetectorKind::Mmse => "mmse",
            DetectorKind::Samp => "samp",
        }
    }
}

impl std::str::FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ml" => Ok(DetectorKind::Ml),
            "mmse" => Ok(DetectorKind::Mmse),
            "samp" => Ok(DetectorKind::Samp),
            other => Err(Error::config(format!(
                "unknown detector '{other}' (expected ml, mmse, or samp)"
            ))),
        }
    }
}

impl std::fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Outcome of one detection: estimated active indices (1-based), symbol
/// labels, and the recovered bit word. `iterations`/`residual` are populated
/// by S-AMP only.
#[derive(Debug, Clone)]
pub struct DetectionResult {
    pub indices: Vec<usize>,
    pub symbol_labels: Vec<usize>,
    pub bits: BitWord,
    pub detector: DetectorKind,
    pub iterations: Option<usize>,
    pub residual: Option<f64>,
}

/// `‖y − Hx‖²` for a candidate transmit vector.
pub fn residual_norm_sq(
    y: &DVector<Complex64>,
    h: &DMatrix<Complex64>,
    x: &DVector<Complex64>,
) -> f64 {
    (y - h * x).norm_squared()
}

/// Size of the ML candidate space for a codec: `(P·M)^G` for FAG-IM and
/// `2^⌊log₂C(N,G)⌋ · M^G` for FA-IM.
pub fn candidate_count(codec: &Codec) -> u128 {
    match codec {
        Codec::FagIm(c) => {
            let per_group = (c.ports_per_group() * c.constellation().order()) as u128;
            per_group.pow(c.num_groups() as u32)
        }
        Codec::FaIm(c) => {
            let symbols = (c.constellation().order() as u128).pow(c.active() as u32);
            c.num_patterns() as u128 * symbols
        }
    }
}

fn check_dims(y: &DVector<Complex64>, h: &DMatrix<Complex64>, num_ports: usize) -> Result<()> {
    if h.ncols() != num_ports {
        return Err(Error::config(format!(
            "channel has {} columns but the codec expects {num_ports} ports",
            h.ncols()
        )));
    }
    if y.len() != h.nrows() {
        return Err(Error::config(format!(
            "received vector length {} does not match {} receive antennas",
            y.len(),
            h.nrows()
        )));
    }
    Ok(())
}

/// Exhaustive maximum-likelihood detection: minimizes `‖y − Hx‖²` over every
/// addressable `(ℐ, s)` hypothesis. Ties resolve to the lowest enumeration
/// rank (groups ascending, ports ascending within a group, constellation
/// labels ascending).
pub fn detect_ml(
    y: &DVector<Complex64>,
    h: &DMatrix<Complex64>,
    codec: &Codec,
) -> Result<DetectionResult> {
    check_dims(y, h, codec.num_ports())?;
    let total = candidate_count(codec);
    if total > ML_CANDIDATE_CAP {
        return Err(Error::config(format!(
            "ML candidate space {total} exceeds the cap {ML_CANDIDATE_CAP}"
        )));
    }

    match codec {
        Codec::FagIm(c) => {
            let groups = c.num_groups();
            let ports = c.ports_per_group();
            let mut search = MlSearch::new(y, h, c.constellation(), groups);
            let mut columns = vec![0usize; groups];
            // depth-first over groups; columns fixed per (group, port) choice
            fn descend(
                search: &mut MlSearch<'_>,
                columns: &mut Vec<usize>,
                depth: usize,
                groups: usize,
                ports: usize,
            ) {
                for port in 0..ports {
                    let column = depth * ports + port;
                    columns[depth] = column;
                    for label in 0..search.constellation.order() {
                        search.push(depth, column, label);
                        if depth + 1 == groups {
                            search.consider(columns, depth + 1);
                        } else {
                            descend(search, columns, depth + 1, groups, ports);
                        }
                    }
                }
            }
            descend(&mut search, &mut columns, 0, groups, ports);
            let (best_columns, best_labels) = search.into_best()?;
            let indices: Vec<usize> = best_columns.iter().map(|&col| col + 1).collect();
            let bits = c.decode(&indices, &best_labels)?;
            Ok(DetectionResult {
                indices,
                symbol_labels: best_labels,
                bits,
                detector: DetectorKind::Ml,
                iterations: None,
                residual: None,
            })
        }
        Codec::FaIm(c) => {
            let active = c.active();
            let mut search = MlSearch::new(y, h, c.constellation(), active);
            for rank in 0..c.num_patterns() {
                let pattern = c.pattern(rank)?;
                let columns: Vec<usize> = pattern.iter().map(|&i| i - 1).collect();
                fn descend(search: &mut MlSearch<'_>, columns: &[usize], depth: usize) {
                    for label in 0..search.constellation.order() {
                        search.push(depth, columns[depth], label);
                        if depth + 1 == columns.len() {
                            search.consider(columns, depth + 1);
                        } else {
                            descend(search, columns, depth + 1);
                        }
                    }
                }
                descend(&mut search, &columns, 0);
            }
            let (best_columns, best_labels) = search.into_best()?;
            let indices: Vec<usize> = best_columns.iter().map(|&col| col + 1).collect();
            let bits = c.decode(&indices, &best_labels)?;
            Ok(DetectionResult {
                indices,
                symbol_labels: best_labels,
                bits,
                detector: DetectorKind::Ml,
                iterations: None,
                residual: None,
            })
        }
    }
}

/// Depth-first candidate search with reusable partial residual vectors.
struct MlSearch<'a> {
    h: &'a DMatrix<Complex64>,
    constellation: &'a Constellation,
    /// levels[d] = y − Σ_{k<d} s_k·H[:,col_k]
    levels: Vec<DVector<Complex64>>,
    labels: Vec<usize>,
    best_dist: f64,
    best_columns: Vec<usize>,
    best_labels: Vec<usize>,
    found: bool,
}

impl<'a> MlSearch<'a> {
    fn new(
        y: &DVector<Complex64>,
        h: &'a DMatrix<Complex64>,
        constellation: &'a Constellation,
        depth: usize,
    ) -> Self {
        let mut levels = Vec::with_capacity(depth + 1);
        levels.push(y.clone());
        for _ in 0..depth {
            levels.push(DVector::zeros(y.len()));
        }
        Self {
            h,
            constellation,
            levels,
            labels: vec![0; depth],
            best_dist: f64::INFINITY,
            best_columns: Vec::new(),
            best_labels: Vec::new(),
            found: false,
        }
    }

    /// Sets levels[depth+1] = levels[depth] − s·H[:,column].
    fn push(&mut self, depth: usize, column: usize, label: usize) {
        let s = self.constellation.point(label);
        let (parents, children) = self.levels.split_at_mut(depth + 1);
        let parent = &parents[depth];
        let child = &mut children[0];
        for r in 0..parent.len() {
            child[r] = parent[r] - s * self.h[(r, column)];
        }
        self.labels[depth] = label;
    }

    fn consider(&mut self, columns: &[usize], depth: usize) {
        let dist = self.levels[depth].norm_squared();
        if dist < self.best_dist {
            self.best_dist = dist;
            self.best_columns = columns[..depth].to_vec();
            self.best_labels = self.labels[..depth].to_vec();
            self.found = true;
        }
    }

    fn into_best(self) -> Result<(Vec<usize>, Vec<usize>)> {
        if !self.found {
            return Err(Error::numerical("ML search found no candidate"));
        }
        Ok((self.best_columns, self.best_labels))
    }
}

/// Linear MMSE detection `x̂ = (HᴴH + N₀I)⁻¹Hᴴy` followed by per-group
/// extraction: `î_g = argmax_{i∈𝕀_g} |x̂(i)|` (lowest index on ties) and the
/// nearest constellation point at `x̂(î_g)`.
pub fn detect_mmse(
    y: &DVector<Complex64>,
    h: &DMatrix<Complex64>,
    n0: f64,
    codec: &FagImCodec,
) -> Result<DetectionResult> {
    check_dims(y, h, codec.num_ports())?;
    if !(n0.is_finite() && n0 > 0.0) {
        return Err(Error::config(format!("MMSE requires N0 > 0, got {n0}")));
    }
    let xhat = mmse_estimate(y, h, n0)?;
    let (indices, symbol_labels) = extract_by_magnitude(&xhat, codec);
    let bits = codec.decode(&indices, &symbol_labels)?;
    Ok(DetectionResult {
        indices,
        symbol_labels,
        bits,
        detector: DetectorKind::Mmse,
        iterations: None,
        residual: None,
    })
}

/// The raw MMSE estimate, solved through a Cholesky factorization of the
/// regularized Gram matrix.
pub fn mmse_estimate(
    y: &DVector<Complex64>,
    h: &DMatrix<Complex64>,
    n0: f64,
) -> Result<DVector<Complex64>> {
    let n = h.ncols();
    let mut gram = h.adjoint() * h;
    for i in 0..n {
        gram[(i, i)] += Complex64::new(n0, 0.0);
    }
    let chol = nalgebra::linalg::Cholesky::new(gram)
        .ok_or_else(|| Error::numerical("MMSE normal equations are not positive definite"))?;
    Ok(chol.solve(&(h.adjoint() * y)))
}

fn extract_by_magnitude(
    xhat: &DVector<Complex64>,
    codec: &FagImCodec,
) -> (Vec<usize>, Vec<usize>) {
    let mut indices = Vec::with_capacity(codec.num_groups());
    let mut labels = Vec::with_capacity(codec.num_groups());
    for g0 in 0..codec.num_groups() {
        let span = codec.group_span(g0);
        let mut best = span.start;
        let mut best_mag = f64::NEG_INFINITY;
        for i in span {
            let mag = xhat[i].norm_sqr();
            if mag > best_mag {
                best_mag = mag;
                best = i;
            }
        }
        indices.push(best + 1);
        labels.push(codec.constellation().nearest_label(xhat[best]));
    }
    (indices, labels)
}

/// How S-AMP turns its final state into hard decisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampExtraction {
    /// MAP rule on the structured posterior marginals (default).
    MarginalMap,
    /// Magnitude/nearest-point extraction applied to the posterior means, the
    /// same rule the MMSE detector uses; kept for ablations.
    LinearStyle,
}

/// S-AMP hyperparameters. Defaults follow the reference configuration:
/// damping 0.9, at most 15 iterations, termination threshold 1e-16.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampParams {
    pub damping: f64,
    pub max_iterations: usize,
    pub termination_threshold: f64,
    pub extraction: SampExtraction,
}

impl Default for SampParams {
    fn default() -> Self {
        Self {
            damping: 0.9,
            max_iterations: 15,
            termination_threshold: 1e-16,
            extraction: SampExtraction::MarginalMap,
        }
    }
}

impl SampParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::config(format!(
                "damping factor must lie in (0, 1], got {}",
                self.damping
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("max iterations must be at least 1"));
        }
        if !(self.termination_threshold >= 0.0) {
            return Err(Error::config(format!(
                "termination threshold must be nonnegative, got {}",
                self.termination_threshold
            )));
        }
        Ok(())
    }
}

/// Full iteration state of the S-AMP recursion, exposed so invariants can be
/// checked per iteration.
#[derive(Debug, Clone)]
pub struct SampState {
    habs2: DMatrix<f64>,
    v: Vec<f64>,
    z: Vec<Complex64>,
    sigma: Vec<f64>,
    r: Vec<Complex64>,
    xhat: Vec<Complex64>,
    vhat: Vec<f64>,
    /// Activation posteriors q(x_i = s), row-major N×M; valid after a step.
    q: Vec<f64>,
    iterations: usize,
    residual: f64,
}

impl SampState {
    /// Initialization per the algorithm: `x̂ = 0`, `v̂ = 1/P`, `V = 1/P`,
    /// `Z = 0`. `h` must be the channel matrix later passed to `step`.
    pub fn new(h: &DMatrix<Complex64>, codec: &FagImCodec) -> Self {
        let n = h.ncols();
        let n_r = h.nrows();
        let m = codec.constellation().order();
        let inv_p = 1.0 / codec.ports_per_group() as f64;
        Self {
            habs2: h.map(|z| z.norm_sqr()),
            v: vec![inv_p; n_r],
            z: vec![Complex64::ZERO; n_r],
            sigma: vec![0.0; n],
            r: vec![Complex64::ZERO; n],
            xhat: vec![Complex64::ZERO; n],
            vhat: vec![inv_p; n],
            q: vec![0.0; n * m],
            iterations: 0,
            residual: f64::INFINITY,
        }
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Stopping metric `‖x̂ᵗ − x̂ᵗ⁻¹‖²/‖x̂ᵗ‖²` of the latest step; infinite
    /// while `x̂ᵗ = 0` so the criterion is never met at that degenerate point.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn observation_variances(&self) -> &[f64] {
        &self.v
    }

    pub fn interference_means(&self) -> &[Complex64] {
        &self.z
    }

    pub fn decoupled_variances(&self) -> &[f64] {
        &self.sigma
    }

    pub fn decoupled_means(&self) -> &[Complex64] {
        &self.r
    }

    pub fn posterior_means(&self) -> &[Complex64] {
        &self.xhat
    }

    pub fn posterior_variances(&self) -> &[f64] {
        &self.vhat
    }

    /// Posterior probability that port `i0` (0-based) carries the symbol with
    /// the given label.
    pub fn posterior(&self, i0: usize, label: usize, order: usize) -> f64 {
        self.q[i0 * order + label]
    }

    /// Posterior probability that port `i0` is active, `Σ_s q(x_i = s)`.
    pub fn activation_mass(&self, i0: usize, order: usize) -> f64 {
        self.q[i0 * order..(i0 + 1) * order].iter().sum()
    }

    /// One damped S-AMP iteration; returns the stopping metric.
    pub fn step(
        &mut self,
        y: &DVector<Complex64>,
        h: &DMatrix<Complex64>,
        n0: f64,
        codec: &FagImCodec,
        damping: f64,
    ) -> f64 {
        let n = h.ncols();
        let n_r = h.nrows();
        let constellation = codec.constellation();
        let m = constellation.order();

        // Observation updates; Z uses the fresh V in the numerator and the
        // previous V in the denominator.
        for r in 0..n_r {
            let mut sum_v = 0.0;
            let mut sum_x = Complex64::ZERO;
            for i in 0..n {
                sum_v += self.habs2[(r, i)] * self.vhat[i];
                sum_x += h[(r, i)] * self.xhat[i];
            }
            let v_prev = self.v[r];
            let v_new = damping * sum_v + (1.0 - damping) * v_prev;
            let onsager = (y[r] - self.z[r]) * (v_new / (n0 + v_prev));
            let z_new = (sum_x - onsager) * damping + self.z[r] * (1.0 - damping);
            self.v[r] = v_new;
            self.z[r] = z_new;
        }

        // Decoupled scalar channels R_i = x_i + noise of variance Σ_i.
        let mut inv = vec![0.0; n_r];
        let mut w = vec![Complex64::ZERO; n_r];
        for r in 0..n_r {
            inv[r] = 1.0 / (n0 + self.v[r]);
            w[r] = (y[r] - self.z[r]) * inv[r];
        }
        for i in 0..n {
            let mut precision = 0.0;
            let mut correction = Complex64::ZERO;
            for r in 0..n_r {
                precision += self.habs2[(r, i)] * inv[r];
                correction += h[(r, i)].conj() * w[r];
            }
            self.sigma[i] = (1.0 / precision).clamp(1e-300, 1e300);
            self.r[i] = self.xhat[i] + correction * self.sigma[i];
        }

        // Structured posterior per group, stabilized by the max exponent.
        let energies: Vec<f64> = (0..m).map(|s| constellation.point(s).norm_sqr()).collect();
        let mut diff_sq = 0.0;
        let mut norm_sq = 0.0;
        for g0 in 0..codec.num_groups() {
            let span = codec.group_span(g0);
            let mut max_exp = f64::NEG_INFINITY;
            for i in span.clone() {
                for s in 0..m {
                    let e = -(energies[s] - 2.0 * (constellation.point(s).conj() * self.r[i]).re)
                        / self.sigma[i];
                    self.q[i * m + s] = e;
                    if e > max_exp {
                        max_exp = e;
                    }
                }
            }
            let mut group_norm = 0.0;
            for i in span.clone() {
                for s in 0..m {
                    let t = (self.q[i * m + s] - max_exp).exp();
                    self.q[i * m + s] = t;
                    group_norm += t;
                }
            }
            for i in span {
                let mut mean = Complex64::ZERO;
                let mut second_moment = 0.0;
                for s in 0..m {
                    let prob = self.q[i * m + s] / group_norm;
                    self.q[i * m + s] = prob;
                    mean += constellation.point(s) * prob;
                    second_moment += energies[s] * prob;
                }
                let variance = (second_moment - mean.norm_sqr()).max(0.0);
                diff_sq += (mean - self.xhat[i]).norm_sqr();
                norm_sq += mean.norm_sqr();
                self.xhat[i] = mean;
                self.vhat[i] = variance;
            }
        }

        self.iterations += 1;
        self.residual = if norm_sq > 0.0 { diff_sq / norm_sq } else { f64::INFINITY };
        self.residual
    }
}

/// Structured AMP detection for FAG-IM.
///
/// Iterates until `max_iterations` or until the stopping metric drops to
/// `termination_threshold`, then extracts hard decisions from the final
/// posterior (or from the posterior means, see [`SampExtraction`]).
pub fn detect_samp(
    y: &DVector<Complex64>,
    h: &DMatrix<Complex64>,
    n0: f64,
    codec: &FagImCodec,
    params: &SampParams,
) -> Result<DetectionResult> {
    check_dims(y, h, codec.num_ports())?;
    params.validate()?;
    if !(n0.is_finite() && n0 >= 0.0) {
        return Err(Error::config(format!("noise variance must be nonnegative, got {n0}")));
    }

    let mut state = SampState::new(h, codec);
    for _ in 0..params.max_iterations {
        let residual = state.step(y, h, n0, codec, params.damping);
        if residual <= params.termination_threshold {
            break;
        }
    }

    let m = codec.constellation().order();
    let (indices, symbol_labels) = match params.extraction {
        SampExtraction::MarginalMap => {
            let mut indices = Vec::with_capacity(codec.num_groups());
            let mut labels = Vec::with_capacity(codec.num_groups());
            for g0 in 0..codec.num_groups() {
                let span = codec.group_span(g0);
                let mut best = span.start;
                let mut best_mass = f64::NEG_INFINITY;
                for i in span {
                    let mass = state.activation_mass(i, m);
                    if mass > best_mass {
                        best_mass = mass;
                        best = i;
                    }
                }
                let mut best_label = 0;
                let mut best_prob = f64::NEG_INFINITY;
                for s in 0..m {
                    let prob = state.posterior(best, s, m);
                    if prob > best_prob {
                        best_prob = prob;
                        best_label = s;
                    }
                }
                indices.push(best + 1);
                labels.push(best_label);
            }
            (indices, labels)
        }
        SampExtraction::LinearStyle => {
            let xhat = DVector::from_column_slice(state.posterior_means());
            extract_by_magnitude(&xhat, codec)
        }
    };

    let bits = codec.decode(&indices, &symbol_labels)?;
    Ok(DetectionResult {
        indices,
        symbol_labels,
        bits,
        detector: DetectorKind::Samp,
        iterations: Some(state.iterations()),
        residual: Some(state.residual()),
    })
}
