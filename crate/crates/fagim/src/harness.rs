//! Configuration, seeded Monte Carlo BER estimation, and CSV reporting.
//!
//! Config files are flat TOML key/value text; every key can be overridden from
//! the command line. A sweep simulates frames per SNR point until each
//! detector under comparison has accumulated `min_bit_errors` or `max_frames`
//! is reached. Per-trial randomness is derived by counter-based mixing of
//! (master seed, SNR index, trial index), so results are bit-identical
//! regardless of execution order or worker count, and all detectors of one
//! trial see the same (bits, H, noise) tuple.

use std::io::Write;
use std::time::Instant;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{abep_upper_bound, AbepEstimate, AbepMode};
use crate::channel::{complex_gaussian, sample_channel, CorrelationMatrix};
use crate::detectors::{
    detect_ml, detect_mmse, detect_samp, DetectorKind, SampExtraction, SampParams,
};
use crate::error::{Error, Result};
use crate::geometry::{FluidAntennaGeometry, GroupingPlan};
use crate::modem::{BitWord, Codec, Constellation, FaImCodec, FagImCodec};

/// Name of the SNR normalization recorded in every CSV row: SNR is the total
/// transmit energy per channel use (G unit-energy symbols) over N₀.
pub const SNR_CONVENTION: &str = "es_total_over_n0";

/// Trials dispatched per parallel batch; fixed so the frame schedule is
/// deterministic.
const TRIAL_BATCH: u64 = 512;

fn default_lambda() -> f64 {
    1.0
}
fn default_mode() -> String {
    "fagim".into()
}
fn default_constellation() -> String {
    "bpsk".into()
}
fn default_detector() -> Vec<String> {
    vec!["ml".into()]
}
fn default_delta() -> f64 {
    0.9
}
fn default_t_max() -> usize {
    15
}
fn default_eps_th() -> f64 {
    1e-16
}
fn default_samp_extraction() -> String {
    "marginal".into()
}
fn default_min_bit_errors() -> u64 {
    200
}
fn default_max_frames() -> u64 {
    10_000_000
}
fn default_seed() -> u64 {
    1
}
fn default_snr_db() -> Vec<f64> {
    Vec::new()
}

/// Accepts either `detector = "ml,mmse"` or `detector = ["ml", "mmse"]`.
fn detector_list<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<String>, D::Error> {
    struct ListOrCsv;
    impl<'de> serde::de::Visitor<'de> for ListOrCsv {
        type Value = Vec<String>;

        fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
            f.write_str("a detector name, a comma-separated list, or an array of names")
        }

        fn visit_str<E: serde::de::Error>(self, v: &str) -> std::result::Result<Self::Value, E> {
            Ok(v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
        }

        fn visit_seq<A: serde::de::SeqAccess<'de>>(
            self,
            mut seq: A,
        ) -> std::result::Result<Self::Value, A::Error> {
            let mut out = Vec::new();
            while let Some(item) = seq.next_element::<String>()? {
                out.push(item);
            }
            Ok(out)
        }
    }
    d.deserialize_any(ListOrCsv)
}

/// Full simulation configuration; field names are the config file keys.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    pub w1: f64,
    pub w2: f64,
    pub n1: usize,
    pub n2: usize,
    pub g1: usize,
    pub g2: usize,
    /// "fagim" or "faim".
    #[serde(default = "default_mode")]
    pub mode: String,
    #[serde(default = "default_constellation")]
    pub constellation: String,
    pub n_r: usize,
    #[serde(default = "default_detector", deserialize_with = "detector_list")]
    pub detector: Vec<String>,
    /// S-AMP damping factor Δ.
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// S-AMP iteration cap.
    #[serde(default = "default_t_max")]
    pub t_max: usize,
    /// S-AMP termination threshold.
    #[serde(default = "default_eps_th")]
    pub eps_th: f64,
    /// S-AMP hard-decision rule: "marginal" (posterior MAP) or "linear".
    #[serde(default = "default_samp_extraction")]
    pub samp_extraction: String,
    #[serde(default = "default_snr_db")]
    pub snr_db: Vec<f64>,
    #[serde(default = "default_min_bit_errors")]
    pub min_bit_errors: u64,
    #[serde(default = "default_max_frames")]
    pub max_frames: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl SimulationConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("invalid config: {e}")))
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Short hex digest of the canonical serialized config, used to join CSV
    /// rows back to the exact configuration that produced them.
    pub fn digest(&self) -> String {
        let canonical = toml::to_string(self).expect("config serializes");
        let hash = Sha256::digest(canonical.as_bytes());
        hash.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }
}

/// Everything a sweep needs, built and validated once from a config.
pub struct SimContext {
    pub config: SimulationConfig,
    pub plan: GroupingPlan,
    pub correlation: CorrelationMatrix,
    pub codec: Codec,
    pub detectors: Vec<DetectorKind>,
    pub samp_params: SampParams,
    pub digest: String,
}

impl SimContext {
    pub fn new(config: SimulationConfig) -> Result<Self> {
        let geometry =
            FluidAntennaGeometry::new(config.lambda, config.w1, config.w2, config.n1, config.n2)?;
        let plan = GroupingPlan::new(geometry, config.g1, config.g2)?;
        let correlation = CorrelationMatrix::build(&plan)?;
        let constellation = Constellation::by_name(&config.constellation)?;

        let codec = match config.mode.as_str() {
            "fagim" => Codec::FagIm(FagImCodec::new(&plan, constellation)?),
            "faim" => Codec::FaIm(FaImCodec::new(
                plan.num_ports(),
                plan.num_groups(),
                constellation,
            )?),
            other => {
                return Err(Error::config(format!(
                    "unknown mode '{other}' (expected fagim or faim)"
                )))
            }
        };

        if config.n_r == 0 {
            return Err(Error::config("n_r must be at least 1"));
        }
        if config.min_bit_errors == 0 {
            return Err(Error::config("min_bit_errors must be at least 1"));
        }
        if config.max_frames == 0 {
            return Err(Error::config("max_frames must be at least 1"));
        }
        if config.snr_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("snr_db grid must be strictly increasing"));
        }

        if config.detector.is_empty() {
            return Err(Error::config("at least one detector must be selected"));
        }
        let mut detectors = Vec::with_capacity(config.detector.len());
        for name in &config.detector {
            let kind: DetectorKind = name.parse()?;
            if kind != DetectorKind::Ml && matches!(codec, Codec::FaIm(_)) {
                return Err(Error::config(format!(
                    "detector '{kind}' requires the fagim mode (faim supports ml only)"
                )));
            }
            if detectors.contains(&kind) {
                return Err(Error::config(format!("detector '{kind}' listed twice")));
            }
            detectors.push(kind);
        }

        let extraction = match config.samp_extraction.as_str() {
            "marginal" => SampExtraction::MarginalMap,
            "linear" => SampExtraction::LinearStyle,
            other => {
                return Err(Error::config(format!(
                    "unknown samp_extraction '{other}' (expected marginal or linear)"
                )))
            }
        };
        let samp_params = SampParams {
            damping: config.delta,
            max_iterations: config.t_max,
            termination_threshold: config.eps_th,
            extraction,
        };
        samp_params.validate()?;

        let digest = config.digest();
        Ok(Self { config, plan, correlation, codec, detectors, samp_params, digest })
    }
}

/// Noise variance for an SNR point under the `es_total_over_n0` convention:
/// `N₀ = G / 10^(snr_db/10)` with `G` unit-energy active symbols per use.
pub fn snr_to_noise_variance(snr_db: f64, active_ports: usize) -> f64 {
    active_ports as f64 / 10f64.powf(snr_db / 10.0)
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based per-trial RNG: the stream is a hash of (master seed, SNR
/// index, trial index), independent of execution order.
pub fn trial_rng(master_seed: u64, snr_index: u64, trial_index: u64) -> ChaCha8Rng {
    let mut state = master_seed;
    let a = splitmix64(&mut state);
    state ^= snr_index.wrapping_mul(0xD1B5_4A32_D192_ED03).wrapping_add(a);
    let b = splitmix64(&mut state);
    state ^= trial_index.wrapping_mul(0x8CB9_2BA7_2F3D_8DD7).wrapping_add(b);
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Uniform random information word of `se` bits.
pub fn draw_word(se: usize, rng: &mut impl Rng) -> BitWord {
    BitWord::new(rng.random::<u64>() & ((1u64 << se) - 1), se)
}

/// AWGN vector `w ~ CN(0, N₀ I)`.
pub fn sample_noise(n_r: usize, n0: f64, rng: &mut impl Rng) -> DVector<Complex64> {
    let scale = n0.sqrt();
    let mut w = DVector::zeros(n_r);
    for r in 0..n_r {
        w[r] = complex_gaussian(rng) * scale;
    }
    w
}

/// Per-detector bit error counts from a single simulated frame.
pub fn run_trial(
    ctx: &SimContext,
    snr_index: u64,
    trial_index: u64,
    n0: f64,
) -> Result<Vec<u64>> {
    let with_context = |e: Error| match e {
        Error::Config(msg) => {
            Error::Config(format!("trial {trial_index} at snr index {snr_index}: {msg}"))
        }
        Error::Numerical(msg) => {
            Error::Numerical(format!("trial {trial_index} at snr index {snr_index}: {msg}"))
        }
        other => other,
    };

    let se = ctx.codec.spectral_efficiency();
    let n_r = ctx.config.n_r;
    let mut rng = trial_rng(ctx.config.seed, snr_index, trial_index);
    // Draw order is fixed: bits, then H, then noise.
    let bits = draw_word(se, &mut rng);
    let frame = ctx.codec.encode(bits).map_err(with_context)?;
    let h = sample_channel(&ctx.correlation, n_r, &mut rng);
    let y = &h * &frame.x + sample_noise(n_r, n0, &mut rng);

    let mut errors = Vec::with_capacity(ctx.detectors.len());
    for kind in &ctx.detectors {
        let detected = match kind {
            DetectorKind::Ml => detect_ml(&y, &h, &ctx.codec),
            DetectorKind::Mmse => match &ctx.codec {
                Codec::FagIm(c) => detect_mmse(&y, &h, n0, c),
                Codec::FaIm(_) => Err(Error::config("mmse requires fagim")),
            },
            DetectorKind::Samp => match &ctx.codec {
                Codec::FagIm(c) => detect_samp(&y, &h, n0, c, &ctx.samp_params),
                Codec::FaIm(_) => Err(Error::config("samp requires fagim")),
            },
        }
        .map_err(with_context)?;
        errors.push(u64::from(detected.bits.hamming(&bits)));
    }
    Ok(errors)
}

/// One CSV row of a BER sweep.
#[derive(Debug, Clone)]
pub struct BerRecord {
    pub snr_db: f64,
    pub detector: DetectorKind,
    pub ber: f64,
    pub bit_errors: u64,
    pub bits_sent: u64,
    pub frames: u64,
    pub wall_time_s: f64,
    pub config_digest: String,
    pub snr_convention: &'static str,
}

/// Runs the full sweep: per SNR point, frames are simulated in fixed-size
/// parallel batches until every detector has `min_bit_errors` or `max_frames`
/// is reached. Records are emitted in SNR order, detectors in config order.
pub fn run_sweep(ctx: &SimContext) -> Result<Vec<BerRecord>> {
    let se = ctx.codec.spectral_efficiency() as u64;
    let mut records = Vec::new();
    for (snr_index, &snr_db) in ctx.config.snr_db.iter().enumerate() {
        let n0 = snr_to_noise_variance(snr_db, ctx.codec.active_ports());
        let start = Instant::now();
        let mut frames = 0u64;
        let mut errors = vec![0u64; ctx.detectors.len()];
        while frames < ctx.config.max_frames {
            let batch = TRIAL_BATCH.min(ctx.config.max_frames - frames);
            let batch_errors: Vec<Vec<u64>> = (frames..frames + batch)
                .into_par_iter()
                .map(|trial| run_trial(ctx, snr_index as u64, trial, n0))
                .collect::<Result<_>>()?;
            for trial_errors in &batch_errors {
                for (acc, &e) in errors.iter_mut().zip(trial_errors) {
                    *acc += e;
                }
            }
            frames += batch;
            if errors.iter().all(|&e| e >= ctx.config.min_bit_errors) {
                break;
            }
        }
        let wall_time_s = start.elapsed().as_secs_f64();
        let bits_sent = frames * se;
        for (kind, &bit_errors) in ctx.detectors.iter().zip(&errors) {
            records.push(BerRecord {
                snr_db,
                detector: *kind,
                ber: bit_errors as f64 / bits_sent as f64,
                bit_errors,
                bits_sent,
                frames,
                wall_time_s,
                config_digest: ctx.digest.clone(),
                snr_convention: SNR_CONVENTION,
            });
        }
    }
    Ok(records)
}

pub fn write_ber_csv<W: Write>(mut out: W, records: &[BerRecord]) -> Result<()> {
    writeln!(
        out,
        "snr_db,detector,ber,bit_errors,bits_sent,frames,wall_time_s,config_digest,snr_convention"
    )?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{:.3},{},{}",
            r.snr_db,
            r.detector,
            r.ber,
            r.bit_errors,
            r.bits_sent,
            r.frames,
            r.wall_time_s,
            r.config_digest,
            r.snr_convention
        )?;
    }
    Ok(())
}

/// One CSV row of an ABEP evaluation.
#[derive(Debug, Clone)]
pub struct AbepRecord {
    pub snr_db: f64,
    pub abep: f64,
    pub mode: &'static str,
    pub pairs_evaluated: u64,
    pub stderr_estimate: f64,
}

/// Evaluates the ABEP bound over an SNR grid with the sweep's noise
/// convention.
pub fn run_abep(ctx: &SimContext, snr_grid: &[f64], mode: &AbepMode) -> Result<Vec<AbepRecord>> {
    let mut records = Vec::with_capacity(snr_grid.len());
    for &snr_db in snr_grid {
        let n0 = snr_to_noise_variance(snr_db, ctx.codec.active_ports());
        let AbepEstimate { value, std_error, pairs_evaluated } = abep_upper_bound(
            &ctx.codec,
            ctx.correlation.matrix(),
            ctx.config.n_r,
            n0,
            mode,
        )?;
        records.push(AbepRecord {
            snr_db,
            abep: value,
            mode: mode.name(),
            pairs_evaluated,
            stderr_estimate: std_error.unwrap_or(0.0),
        });
    }
    Ok(records)
}

pub fn write_abep_csv<W: Write>(mut out: W, records: &[AbepRecord]) -> Result<()> {
    writeln!(out, "snr_db,abep,mode,pairs_evaluated,stderr_estimate")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.snr_db, r.abep, r.mode, r.pairs_evaluated, r.stderr_estimate
        )?;
    }
    Ok(())
}

/// Human-readable dump of the geometry, label maps, index sets, and the
/// correlation spectrum, followed by machine-readable CSV sections.
pub fn inspect_report(ctx: &SimContext) -> String {
    use std::fmt::Write as _;

    let mut out = String::new();
    let geom = ctx.plan.geometry();
    let (n1, n2) = geom.ports_per_axis();
    let (d1, d2) = geom.spacings();
    let (w1, w2) = geom.aperture_factors();
    let (g1, g2) = ctx.plan.groups_per_axis();
    let (p1, p2) = ctx.plan.group_shape();

    writeln!(out, "geometry").unwrap();
    writeln!(out, "  lambda = {}", geom.wavelength()).unwrap();
    writeln!(out, "  W1 = {w1}  W2 = {w2}").unwrap();
    writeln!(out, "  N1 = {n1}  N2 = {n2}  N = {}", ctx.plan.num_ports()).unwrap();
    writeln!(out, "  D1 = {d1:.6}  D2 = {d2:.6}").unwrap();
    writeln!(out, "grouping").unwrap();
    writeln!(out, "  G1 = {g1}  G2 = {g2}  G = {}", ctx.plan.num_groups()).unwrap();
    writeln!(out, "  P1 = {p1}  P2 = {p2}  P = {}", ctx.plan.ports_per_group()).unwrap();
    writeln!(out, "  mode = {}  SE = {} bpcu", ctx.codec.mode_name(), ctx.codec.spectral_efficiency())
        .unwrap();
    writeln!(out).unwrap();

    writeln!(out, "port map").unwrap();
    writeln!(out, "  {:>4} {:>3} {:>3} {:>3} {:>3} {:>3} {:>3} {:>12} {:>12}",
        "i", "g", "p", "a", "b", "c", "d", "x", "y").unwrap();
    for i in 1..=ctx.plan.num_ports() {
        let (g, p) = ctx.plan.decompose(i).unwrap();
        let (a, b) = ctx.plan.group_position(g).unwrap();
        let (c, d) = ctx.plan.port_position(p).unwrap();
        let (x, y) = ctx.plan.port_coordinates(i).unwrap();
        writeln!(out, "  {i:>4} {g:>3} {p:>3} {a:>3} {b:>3} {c:>3} {d:>3} {x:>12.6} {y:>12.6}")
            .unwrap();
    }
    writeln!(out).unwrap();

    writeln!(out, "index sets").unwrap();
    for (g0, set) in ctx.plan.index_sets().iter().enumerate() {
        let list = set.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(", ");
        writeln!(out, "  I_{} = {{{list}}}", g0 + 1).unwrap();
    }
    writeln!(out).unwrap();

    writeln!(out, "eigenvalues of J_t (descending)").unwrap();
    for (k, lam) in ctx.correlation.eigenvalues().iter().enumerate() {
        writeln!(out, "  lambda_{} = {lam:.9}", k + 1).unwrap();
    }
    writeln!(out).unwrap();

    writeln!(out, "csv ports").unwrap();
    writeln!(out, "i,g,p,a,b,c,d,x,y").unwrap();
    for i in 1..=ctx.plan.num_ports() {
        let (g, p) = ctx.plan.decompose(i).unwrap();
        let (a, b) = ctx.plan.group_position(g).unwrap();
        let (c, d) = ctx.plan.port_position(p).unwrap();
        let (x, y) = ctx.plan.port_coordinates(i).unwrap();
        writeln!(out, "{i},{g},{p},{a},{b},{c},{d},{x},{y}").unwrap();
    }
    writeln!(out).unwrap();

    writeln!(out, "csv j_t").unwrap();
    let n = ctx.plan.num_ports();
    for i in 0..n {
        let row = (0..n)
            .map(|j| format!("{}", ctx.correlation.matrix()[(i, j)]))
            .collect::<Vec<_>>()
            .join(",");
        writeln!(out, "{row}").unwrap();
    }
    writeln!(out).unwrap();

    writeln!(out, "csv eigenvalues").unwrap();
    writeln!(out, "k,lambda").unwrap();
    for (k, lam) in ctx.correlation.eigenvalues().iter().enumerate() {
        writeln!(out, "{},{lam}", k + 1).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG5_TOML: &str = r#"
        w1 = 2.0
        w2 = 4.0
        n1 = 2
        n2 = 4
        g1 = 1
        g2 = 2
        mode = "fagim"
        constellation = "bpsk"
        n_r = 4
        detector = "ml"
        snr_db = [0.0, 4.0]
        min_bit_errors = 50
        max_frames = 20000
        seed = 7
    "#;

    fn fig5_ctx() -> SimContext {
        SimContext::new(SimulationConfig::from_toml_str(FIG5_TOML).unwrap()).unwrap()
    }

    #[test]
    fn config_defaults_match_reference_settings() {
        let cfg = SimulationConfig::from_toml_str(
            "w1=1.0\nw2=1.0\nn1=2\nn2=2\ng1=1\ng2=2\nn_r=2",
        )
        .unwrap();
        assert_eq!(cfg.lambda, 1.0);
        assert_eq!(cfg.delta, 0.9);
        assert_eq!(cfg.t_max, 15);
        assert_eq!(cfg.eps_th, 1e-16);
        assert_eq!(cfg.min_bit_errors, 200);
        assert_eq!(cfg.max_frames, 10_000_000);
        assert_eq!(cfg.detector, vec!["ml".to_string()]);
        assert_eq!(cfg.mode, "fagim");
        assert_eq!(cfg.samp_extraction, "marginal");
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let err = SimulationConfig::from_toml_str("w1=1.0\nbogus=3\n");
        assert!(err.is_err());
    }

    #[test]
    fn detector_accepts_csv_and_array() {
        let base = "w1=1.0\nw2=1.0\nn1=2\nn2=2\ng1=1\ng2=2\nn_r=2\n";
        let cfg =
            SimulationConfig::from_toml_str(&format!("{base}detector = \"ml, mmse\"")).unwrap();
        assert_eq!(cfg.detector, vec!["ml", "mmse"]);
        let cfg =
            SimulationConfig::from_toml_str(&format!("{base}detector = [\"samp\"]")).unwrap();
        assert_eq!(cfg.detector, vec!["samp"]);
    }

    #[test]
    fn context_rejects_bad_configs() {
        let bad = |patch: &str| {
            let text = format!(
                "w1=2.0\nw2=4.0\nn1=2\nn2=4\ng1=1\ng2=2\nn_r=4\n{patch}"
            );
            SimContext::new(SimulationConfig::from_toml_str(&text).unwrap())
        };
        assert!(bad("mode=\"faim\"\ndetector=\"mmse\"").is_err());
        assert!(bad("detector=\"zf\"").is_err());
        assert!(bad("snr_db=[4.0, 2.0]").is_err());
        assert!(bad("snr_db=[2.0, 2.0]").is_err());
        assert!(bad("min_bit_errors=0").is_err());
        assert!(bad("delta=1.5").is_err());
        assert!(bad("constellation=\"qam64\"").is_err());
        assert!(bad("samp_extraction=\"other\"").is_err());
        assert!(bad("detector=\"ml,ml\"").is_err());
    }

    #[test]
    fn snr_conversion() {
        assert_eq!(snr_to_noise_variance(0.0, 1), 1.0);
        assert!((snr_to_noise_variance(10.0, 2) - 0.2).abs() < 1e-15);
        assert_eq!(snr_to_noise_variance(f64::INFINITY, 2), 0.0);
    }

    #[test]
    fn trial_rng_is_stable_and_stream_separated() {
        let mut a = trial_rng(1, 0, 0);
        let mut b = trial_rng(1, 0, 0);
        assert_eq!(a.random::<u64>(), b.random::<u64>());
        let mut c = trial_rng(1, 0, 1);
        let mut d = trial_rng(1, 1, 0);
        let mut e = trial_rng(2, 0, 0);
        let x = trial_rng(1, 0, 0).random::<u64>();
        assert_ne!(x, c.random::<u64>());
        assert_ne!(x, d.random::<u64>());
        assert_ne!(x, e.random::<u64>());
    }

    #[test]
    fn trial_is_deterministic() {
        let ctx = fig5_ctx();
        let e1 = run_trial(&ctx, 0, 17, 0.5).unwrap();
        let e2 = run_trial(&ctx, 0, 17, 0.5).unwrap();
        assert_eq!(e1, e2);
    }

    #[test]
    fn noiseless_ml_trial_has_zero_errors() {
        let ctx = fig5_ctx();
        for trial in 0..50 {
            let errors = run_trial(&ctx, 3, trial, 0.0).unwrap();
            assert_eq!(errors, vec![0]);
        }
    }

    #[test]
    fn sweep_counts_are_consistent() {
        let ctx = fig5_ctx();
        let records = run_sweep(&ctx).unwrap();
        assert_eq!(records.len(), 2);
        for r in &records {
            assert_eq!(r.bits_sent, r.frames * 6);
            assert!((r.ber - r.bit_errors as f64 / r.bits_sent as f64).abs() < 1e-15);
            assert!(r.ber <= 1.0);
            assert_eq!(r.snr_convention, SNR_CONVENTION);
            assert!(r.bit_errors >= 50 || r.frames == 20000);
        }
        assert!(records[0].snr_db < records[1].snr_db);
    }

    #[test]
    fn sweep_is_reproducible_across_worker_counts() {
        let ctx = fig5_ctx();
        let baseline = run_sweep(&ctx).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let single = pool.install(|| run_sweep(&ctx).unwrap());
        assert_eq!(baseline.len(), single.len());
        for (a, b) in baseline.iter().zip(&single) {
            assert_eq!(a.bit_errors, b.bit_errors);
            assert_eq!(a.frames, b.frames);
            assert_eq!(a.ber.to_bits(), b.ber.to_bits());
            assert_eq!(a.config_digest, b.config_digest);
        }
    }

    #[test]
    fn empty_snr_grid_gives_empty_output() {
        let mut cfg = SimulationConfig::from_toml_str(FIG5_TOML).unwrap();
        cfg.snr_db.clear();
        let ctx = SimContext::new(cfg).unwrap();
        assert!(run_sweep(&ctx).unwrap().is_empty());
    }

    #[test]
    fn csv_layout() {
        let ctx = fig5_ctx();
        let rec = BerRecord {
            snr_db: 2.0,
            detector: DetectorKind::Ml,
            ber: 0.001,
            bit_errors: 6,
            bits_sent: 6000,
            frames: 1000,
            wall_time_s: 0.25,
            config_digest: ctx.digest.clone(),
            snr_convention: SNR_CONVENTION,
        };
        let mut buf = Vec::new();
        write_ber_csv(&mut buf, &[rec]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "snr_db,detector,ber,bit_errors,bits_sent,frames,wall_time_s,config_digest,snr_convention"
        );
        let row = lines.next().unwrap();
        assert!(row.starts_with("2,ml,0.001,6,6000,1000,"));
        assert!(row.ends_with(&format!("{},{}", ctx.digest, SNR_CONVENTION)));
    }

    #[test]
    fn abep_records_use_the_same_convention() {
        let ctx = fig5_ctx();
        let records = run_abep(&ctx, &[0.0, 6.0, 12.0], &AbepMode::Exact).unwrap();
        assert_eq!(records.len(), 3);
        assert!(records[0].abep > records[1].abep && records[1].abep > records[2].abep);
        assert_eq!(records[0].pairs_evaluated, 4096);
        let mut buf = Vec::new();
        write_abep_csv(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("snr_db,abep,mode,pairs_evaluated,stderr_estimate"));
    }

    #[test]
    fn inspect_report_contains_tables() {
        let ctx = fig5_ctx();
        let report = inspect_report(&ctx);
        assert!(report.contains("port map"));
        assert!(report.contains("I_1 = {1, 2, 3, 4}"));
        assert!(report.contains("I_2 = {5, 6, 7, 8}"));
        assert!(report.contains("csv j_t"));
        assert!(report.contains("csv eigenvalues"));
    }

    #[test]
    fn digest_changes_with_config() {
        let a = SimulationConfig::from_toml_str(FIG5_TOML).unwrap();
        let mut b = a.clone();
        b.seed = 8;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest(), a.clone().digest());
        assert_eq!(a.digest().len(), 12);
    }
}
