//! Constellations and the index-modulation encoders/decoders.
//!
//! Two schemes are implemented over the same `N`-port antenna:
//!
//! - FAG-IM: the port grid is partitioned into `G` groups of `P` ports; each
//!   group consumes `log₂P` index bits to activate one of its ports plus
//!   `log₂M` symbol bits, giving `SE = G(log₂P + log₂M)` bits per channel use.
//! - FA-IM (baseline): `⌊log₂ C(N,G)⌋` bits select a `G`-combination of ports
//!   (no grouping) and `G·log₂M` bits select the symbols, assigned to the
//!   active ports in ascending index order.
//!
//! Both encoders produce a sparse length-`N` transmit vector with exactly `G`
//! nonzero entries and are exact inverses of their decoders over the full bit
//! space.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::GroupingPlan;

/// A bit word of up to 63 bits in transmission order (first bit = MSB).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BitWord {
    value: u64,
    len: usize,
}

impl BitWord {
    pub fn new(value: u64, len: usize) -> Self {
        assert!(len <= 63, "bit words are limited to 63 bits");
        assert!(len == 64 || value < (1u64 << len), "value does not fit in {len} bits");
        Self { value, len }
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// The `k`-th transmitted bit (0-based).
    pub fn bit(&self, k: usize) -> bool {
        assert!(k < self.len);
        (self.value >> (self.len - 1 - k)) & 1 == 1
    }

    /// Unsigned value of bits `start..start+width`, read MSB-first.
    pub fn field(&self, start: usize, width: usize) -> u64 {
        assert!(start + width <= self.len);
        if width == 0 {
            return 0;
        }
        (self.value >> (self.len - start - width)) & ((1u64 << width) - 1)
    }

    /// Number of differing bits.
    pub fn hamming(&self, other: &BitWord) -> u32 {
        debug_assert_eq!(self.len, other.len);
        (self.value ^ other.value).count_ones()
    }

    /// Bits as a 0/1 vector in transmission order.
    pub fn to_bits(&self) -> Vec<u8> {
        (0..self.len).map(|k| self.bit(k) as u8).collect()
    }
}

impl std::fmt::Display for BitWord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for k in 0..self.len {
            write!(f, "{}", self.bit(k) as u8)?;
        }
        Ok(())
    }
}

/// Gray-labeled constellation normalized to unit average energy.
///
/// `points[label]` is the symbol whose bit pattern equals `label` read as an
/// unsigned integer.
#[derive(Debug, Clone)]
pub struct Constellation {
    name: String,
    points: Vec<Complex64>,
}

impl Constellation {
    /// BPSK with points {+1, −1}; bit 0 maps to +1.
    pub fn bpsk() -> Self {
        Self::checked("bpsk", vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)])
    }

    /// Gray-mapped 4-QAM (QPSK): first bit selects the in-phase sign, second
    /// the quadrature sign; 0 maps to the positive level.
    pub fn qam4() -> Self {
        let a = std::f64::consts::FRAC_1_SQRT_2;
        let level = |bit: usize| if bit == 0 { a } else { -a };
        let points = (0..4)
            .map(|label| Complex64::new(level(label >> 1), level(label & 1)))
            .collect();
        Self::checked("qam4", points)
    }

    /// Square Gray-mapped 16-QAM: two bits per axis, Gray-decoded onto the
    /// ascending levels {−3, −1, +1, +3}/√10.
    pub fn qam16() -> Self {
        let scale = 1.0 / 10.0_f64.sqrt();
        let levels = [-3.0, -1.0, 1.0, 3.0].map(|l| l * scale);
        let gray_to_index = |g: usize| g ^ (g >> 1);
        let points = (0..16)
            .map(|label| {
                let i_level = levels[gray_to_index(label >> 2)];
                let q_level = levels[gray_to_index(label & 3)];
                Complex64::new(i_level, q_level)
            })
            .collect();
        Self::checked("qam16", points)
    }

    /// Lookup by config name: "bpsk", "qam4", or "qam16".
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "bpsk" => Ok(Self::bpsk()),
            "qam4" => Ok(Self::qam4()),
            "qam16" => Ok(Self::qam16()),
            other => Err(Error::config(format!(
                "unknown constellation '{other}' (expected bpsk, qam4, or qam16)"
            ))),
        }
    }

    fn checked(name: &str, points: Vec<Complex64>) -> Self {
        let m = points.len();
        assert!(m.is_power_of_two());
        let energy: f64 = points.iter().map(|p| p.norm_sqr()).sum::<f64>() / m as f64;
        assert!((energy - 1.0).abs() < 1e-12, "constellation energy {energy} != 1");
        Self { name: name.to_string(), points }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Constellation order `M`.
    pub fn order(&self) -> usize {
        self.points.len()
    }

    /// `log₂ M` bits per symbol.
    pub fn bits_per_symbol(&self) -> usize {
        self.points.len().trailing_zeros() as usize
    }

    pub fn point(&self, label: usize) -> Complex64 {
        self.points[label]
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    /// Label of the nearest constellation point; ties resolve to the lowest
    /// label.
    pub fn nearest_label(&self, z: Complex64) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (label, &p) in self.points.iter().enumerate() {
            let dist = (z - p).norm_sqr();
            if dist < best_dist {
                best_dist = dist;
                best = label;
            }
        }
        best
    }

    /// Largest symbol magnitude.
    pub fn max_amplitude(&self) -> f64 {
        self.points.iter().map(|p| p.norm()).fold(0.0, f64::max)
    }
}

/// Exact binomial coefficient in u128 (sufficient up to n = 64 and beyond).
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 1..=k {
        c = c * (n - k + i) as u128 / i as u128;
    }
    c
}

fn floor_log2(x: u128) -> usize {
    debug_assert!(x > 0);
    127 - x.leading_zeros() as usize
}

fn require_power_of_two(value: usize, what: &str) -> Result<()> {
    if value == 0 || !value.is_power_of_two() {
        return Err(Error::config(format!("{what} must be a power of 2, got {value}")));
    }
    Ok(())
}

/// `SE = G(log₂P + log₂M)` bits per channel use for FAG-IM.
pub fn spectral_efficiency_fagim(groups: usize, ports_per_group: usize, order: usize) -> Result<usize> {
    if groups == 0 {
        return Err(Error::config("group count must be at least 1"));
    }
    require_power_of_two(ports_per_group, "ports per group P")?;
    require_power_of_two(order, "constellation order M")?;
    if order < 2 {
        return Err(Error::config("constellation order M must be at least 2"));
    }
    Ok(groups * (ports_per_group.trailing_zeros() as usize + order.trailing_zeros() as usize))
}

/// `SE = ⌊log₂ C(N,G)⌋ + G·log₂M` bits per channel use for FA-IM.
pub fn spectral_efficiency_faim(num_ports: usize, active: usize, order: usize) -> Result<usize> {
    if active == 0 || active > num_ports {
        return Err(Error::config(format!(
            "active port count G={active} must satisfy 1 <= G <= N={num_ports}"
        )));
    }
    require_power_of_two(order, "constellation order M")?;
    if order < 2 {
        return Err(Error::config("constellation order M must be at least 2"));
    }
    let patterns = binomial(num_ports, active);
    Ok(floor_log2(patterns) + active * order.trailing_zeros() as usize)
}

/// One encoded channel use: the bit word, the activated port indices
/// (1-based), the symbol labels carried on them, and the sparse transmit
/// vector `x = Σ_g s_g e_{i_g}`.
#[derive(Debug, Clone)]
pub struct TransmissionFrame {
    pub bits: BitWord,
    pub active_indices: Vec<usize>,
    pub symbol_labels: Vec<usize>,
    pub x: DVector<Complex64>,
}

/// FAG-IM bit mapping over a grouping plan.
#[derive(Debug, Clone)]
pub struct FagImCodec {
    groups: usize,
    ports_per_group: usize,
    index_bits: usize,
    num_ports: usize,
    constellation: Constellation,
}

impl FagImCodec {
    pub fn new(plan: &GroupingPlan, constellation: Constellation) -> Result<Self> {
        let groups = plan.num_groups();
        let ports_per_group = plan.ports_per_group();
        require_power_of_two(ports_per_group, "ports per group P")?;
        let se = spectral_efficiency_fagim(groups, ports_per_group, constellation.order())?;
        if se > 63 {
            return Err(Error::config(format!("spectral efficiency {se} exceeds the 63-bit limit")));
        }
        Ok(Self {
            groups,
            ports_per_group,
            index_bits: ports_per_group.trailing_zeros() as usize,
            num_ports: plan.num_ports(),
            constellation,
        })
    }

    pub fn num_groups(&self) -> usize {
        self.groups
    }

    pub fn ports_per_group(&self) -> usize {
        self.ports_per_group
    }

    pub fn num_ports(&self) -> usize {
        self.num_ports
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    /// Index bits per group, `log₂P`.
    pub fn index_bits(&self) -> usize {
        self.index_bits
    }

    pub fn spectral_efficiency(&self) -> usize {
        self.groups * (self.index_bits + self.constellation.bits_per_symbol())
    }

    /// 0-based port range of group `g0` (0-based), i.e. `𝕀_{g0+1} − 1`.
    pub fn group_span(&self, g0: usize) -> std::ops::Range<usize> {
        g0 * self.ports_per_group..(g0 + 1) * self.ports_per_group
    }

    /// Splits the word into `G` streams of `log₂P + log₂M` bits; in each
    /// stream the leading bits select the port label (value + 1) and the
    /// trailing bits the symbol.
    pub fn encode(&self, bits: BitWord) -> Result<TransmissionFrame> {
        let se = self.spectral_efficiency();
        if bits.len() != se {
            return Err(Error::config(format!(
                "expected {se} bits for FAG-IM, got {}",
                bits.len()
            )));
        }
        let b2 = self.constellation.bits_per_symbol();
        let stride = self.index_bits + b2;
        let mut active_indices = Vec::with_capacity(self.groups);
        let mut symbol_labels = Vec::with_capacity(self.groups);
        let mut x = DVector::zeros(self.num_ports);
        for g0 in 0..self.groups {
            let port_value = bits.field(g0 * stride, self.index_bits) as usize;
            let label = bits.field(g0 * stride + self.index_bits, b2) as usize;
            let index = g0 * self.ports_per_group + port_value + 1;
            x[index - 1] = self.constellation.point(label);
            active_indices.push(index);
            symbol_labels.push(label);
        }
        Ok(TransmissionFrame { bits, active_indices, symbol_labels, x })
    }

    /// Inverse of [`encode`](Self::encode) from detected indices and symbol
    /// labels (one per group, in group order).
    pub fn decode(&self, indices: &[usize], symbol_labels: &[usize]) -> Result<BitWord> {
        if indices.len() != self.groups || symbol_labels.len() != self.groups {
            return Err(Error::config(format!(
                "expected {} (index, symbol) pairs, got ({}, {})",
                self.groups,
                indices.len(),
                symbol_labels.len()
            )));
        }
        let b2 = self.constellation.bits_per_symbol();
        let mut word: u64 = 0;
        for (g0, (&index, &label)) in indices.iter().zip(symbol_labels).enumerate() {
            let span = self.group_span(g0);
            if index < span.start + 1 || index > span.end {
                return Err(Error::config(format!(
                    "port index {index} outside group {} range {}..={}",
                    g0 + 1,
                    span.start + 1,
                    span.end
                )));
            }
            if label >= self.constellation.order() {
                return Err(Error::config(format!("symbol label {label} out of range")));
            }
            let port_value = (index - 1 - span.start) as u64;
            word = (word << self.index_bits) | port_value;
            word = (word << b2) | label as u64;
        }
        Ok(BitWord::new(word, self.spectral_efficiency()))
    }
}

/// FA-IM baseline bit mapping: combination index plus per-port symbols.
///
/// Combinations are ranked lexicographically over ascending port indices,
/// except for the published `N=4, G=2` case which uses the reference pattern
/// table {1,2}, {2,3}, {3,4}, {1,4}.
#[derive(Debug, Clone)]
pub struct FaImCodec {
    num_ports: usize,
    active: usize,
    index_bits: usize,
    lookup: Option<Vec<Vec<usize>>>,
    constellation: Constellation,
}

impl FaImCodec {
    pub fn new(num_ports: usize, active: usize, constellation: Constellation) -> Result<Self> {
        let se = spectral_efficiency_faim(num_ports, active, constellation.order())?;
        if se > 63 {
            return Err(Error::config(format!("spectral efficiency {se} exceeds the 63-bit limit")));
        }
        let index_bits = floor_log2(binomial(num_ports, active));
        let lookup = (num_ports == 4 && active == 2)
            .then(|| vec![vec![1, 2], vec![2, 3], vec![3, 4], vec![1, 4]]);
        Ok(Self { num_ports, active, index_bits, lookup, constellation })
    }

    pub fn num_ports(&self) -> usize {
        self.num_ports
    }

    /// Number of simultaneously active ports `G`.
    pub fn active(&self) -> usize {
        self.active
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    /// Combination index bits, `⌊log₂ C(N,G)⌋`.
    pub fn index_bits(&self) -> usize {
        self.index_bits
    }

    pub fn spectral_efficiency(&self) -> usize {
        self.index_bits + self.active * self.constellation.bits_per_symbol()
    }

    /// Number of addressable activation patterns, `2^⌊log₂ C(N,G)⌋`.
    pub fn num_patterns(&self) -> u64 {
        1u64 << self.index_bits
    }

    /// The activation pattern for a given rank, as ascending 1-based indices.
    pub fn pattern(&self, rank: u64) -> Result<Vec<usize>> {
        if rank >= self.num_patterns() {
            return Err(Error::config(format!(
                "pattern rank {rank} out of range 0..{}",
                self.num_patterns()
            )));
        }
        match &self.lookup {
            Some(table) => Ok(table[rank as usize].clone()),
            None => Ok(unrank_combination(rank as u128, self.num_ports, self.active)),
        }
    }

    /// Rank of an activation pattern; ranks beyond the addressable range are
    /// clamped to the maximum rank before bit recovery.
    fn pattern_rank_clamped(&self, combo: &[usize]) -> u64 {
        let max_rank = self.num_patterns() - 1;
        match &self.lookup {
            Some(table) => table
                .iter()
                .position(|c| c == combo)
                .map(|r| r as u64)
                .unwrap_or(max_rank),
            None => {
                let rank = rank_combination(combo, self.num_ports);
                if rank > max_rank as u128 {
                    max_rank
                } else {
                    rank as u64
                }
            }
        }
    }

    /// First `⌊log₂ C(N,G)⌋` bits select a port combination; the remaining
    /// bits select the symbols placed on the active ports in ascending port
    /// order.
    pub fn encode(&self, bits: BitWord) -> Result<TransmissionFrame> {
        let se = self.spectral_efficiency();
        if bits.len() != se {
            return Err(Error::config(format!(
                "expected {se} bits for FA-IM, got {}",
                bits.len()
            )));
        }
        let rank = bits.field(0, self.index_bits);
        let active_indices = self.pattern(rank)?;
        let b2 = self.constellation.bits_per_symbol();
        let mut symbol_labels = Vec::with_capacity(self.active);
        let mut x = DVector::zeros(self.num_ports);
        for (k, &index) in active_indices.iter().enumerate() {
            let label = bits.field(self.index_bits + k * b2, b2) as usize;
            x[index - 1] = self.constellation.point(label);
            symbol_labels.push(label);
        }
        Ok(TransmissionFrame { bits, active_indices, symbol_labels, x })
    }

    /// Inverse of [`encode`](Self::encode); the (index, label) pairs are
    /// sorted by index before ranking.
    pub fn decode(&self, indices: &[usize], symbol_labels: &[usize]) -> Result<BitWord> {
        if indices.len() != self.active || symbol_labels.len() != self.active {
            return Err(Error::config(format!(
                "expected {} (index, symbol) pairs, got ({}, {})",
                self.active,
                indices.len(),
                symbol_labels.len()
            )));
        }
        let mut pairs: Vec<(usize, usize)> =
            indices.iter().copied().zip(symbol_labels.iter().copied()).collect();
        pairs.sort_unstable_by_key(|&(i, _)| i);
        for window in pairs.windows(2) {
            if window[0].0 == window[1].0 {
                return Err(Error::config("duplicate port index in FA-IM combination"));
            }
        }
        for &(i, label) in &pairs {
            if i < 1 || i > self.num_ports {
                return Err(Error::config(format!("port index {i} out of range")));
            }
            if label >= self.constellation.order() {
                return Err(Error::config(format!("symbol label {label} out of range")));
            }
        }
        let combo: Vec<usize> = pairs.iter().map(|&(i, _)| i).collect();
        let rank = self.pattern_rank_clamped(&combo);
        let b2 = self.constellation.bits_per_symbol();
        let mut word = rank;
        for &(_, label) in &pairs {
            word = (word << b2) | label as u64;
        }
        Ok(BitWord::new(word, self.spectral_efficiency()))
    }
}

/// Lexicographic unranking of a `k`-combination of `{1..n}`.
fn unrank_combination(mut rank: u128, n: usize, k: usize) -> Vec<usize> {
    let mut combo = Vec::with_capacity(k);
    let mut next = 1;
    let mut remaining = k;
    while remaining > 0 {
        let with_next = binomial(n - next, remaining - 1);
        if rank < with_next {
            combo.push(next);
            remaining -= 1;
        } else {
            rank -= with_next;
        }
        next += 1;
    }
    combo
}

/// Lexicographic rank of an ascending `k`-combination of `{1..n}`.
fn rank_combination(combo: &[usize], n: usize) -> u128 {
    let k = combo.len();
    let mut rank: u128 = 0;
    let mut prev = 0;
    for (pos, &element) in combo.iter().enumerate() {
        for skipped in (prev + 1)..element {
            rank += binomial(n - skipped, k - pos - 1);
        }
        prev = element;
    }
    rank
}

/// Either of the two transmission schemes behind one interface.
#[derive(Debug, Clone)]
pub enum Codec {
    FagIm(FagImCodec),
    FaIm(FaImCodec),
}

impl Codec {
    pub fn spectral_efficiency(&self) -> usize {
        match self {
            Codec::FagIm(c) => c.spectral_efficiency(),
            Codec::FaIm(c) => c.spectral_efficiency(),
        }
    }

    pub fn num_ports(&self) -> usize {
        match self {
            Codec::FagIm(c) => c.num_ports(),
            Codec::FaIm(c) => c.num_ports(),
        }
    }

    /// Number of simultaneously active ports.
    pub fn active_ports(&self) -> usize {
        match self {
            Codec::FagIm(c) => c.num_groups(),
            Codec::FaIm(c) => c.active(),
        }
    }

    pub fn constellation(&self) -> &Constellation {
        match self {
            Codec::FagIm(c) => c.constellation(),
            Codec::FaIm(c) => c.constellation(),
        }
    }

    pub fn mode_name(&self) -> &'static str {
        match self {
            Codec::FagIm(_) => "fagim",
            Codec::FaIm(_) => "faim",
        }
    }

    pub fn encode(&self, bits: BitWord) -> Result<TransmissionFrame> {
        match self {
            Codec::FagIm(c) => c.encode(bits),
            Codec::FaIm(c) => c.encode(bits),
        }
    }

    pub fn decode(&self, indices: &[usize], symbol_labels: &[usize]) -> Result<BitWord> {
        match self {
            Codec::FagIm(c) => c.decode(indices, symbol_labels),
            Codec::FaIm(c) => c.decode(indices, symbol_labels),
        }
    }
}
