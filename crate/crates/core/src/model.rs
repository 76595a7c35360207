//! The model family: lattice, boundary mechanisms, configurations and the
//! exact microscopic transition rates of the full generator.
//!
//! Sites are numbered `1..=N-1` throughout. Rates are per unit of
//! microscopic time; the diffusive `N^2` speed-up is applied by consumers.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::profile::InitialProfile;

/// Largest block width accepted anywhere (the block chain is dense in `2^p`).
pub const MAX_BLOCK_WIDTH: usize = 12;

/// Lattice `{1, ..., N-1}` with a left boundary block `{1, ..., p}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeSpec {
    n: usize,
    p: usize,
}

impl LatticeSpec {
    pub fn new(n: usize, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidModel("block width p must be >= 1".into()));
        }
        if p > MAX_BLOCK_WIDTH {
            return Err(Error::InvalidModel(format!(
                "block width p = {p} exceeds {MAX_BLOCK_WIDTH}"
            )));
        }
        if n < p + 3 {
            return Err(Error::InvalidModel(format!(
                "N = {n} too small for p = {p}: need N >= p + 3"
            )));
        }
        Ok(Self { n, p })
    }

    /// The scale parameter `N` (the right reservoir sits at `N`).
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of lattice sites, `N - 1`.
    pub fn sites(&self) -> usize {
        self.n - 1
    }

    pub fn contains(&self, k: usize) -> bool {
        (1..self.n).contains(&k)
    }

    pub fn check_site(&self, k: usize) -> Result<()> {
        contract!(self.contains(k), "site {k} outside 1..={}", self.n - 1);
        Ok(())
    }

    /// Squared diffusive clock factor `N^2`.
    pub fn clock(&self) -> f64 {
        (self.n as f64).powi(2)
    }
}

/// Reservoir, copy and anticopy mechanisms acting on the block.
///
/// `copy[j][k]` is the rate at which site `j+1` adopts the value of site
/// `k+1`; `anticopy[j][k]` the rate at which it adopts the inverse value.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredBoundary {
    pub r: Vec<f64>,
    pub alpha: Vec<f64>,
    pub copy: Vec<Vec<f64>>,
    pub anticopy: Vec<Vec<f64>>,
}

impl StructuredBoundary {
    /// Reservoirs only: site `j` relaxes to `alpha[j]` at rate `r[j]`.
    pub fn reservoirs(r: Vec<f64>, alpha: Vec<f64>) -> Self {
        let p = r.len();
        Self {
            r,
            alpha,
            copy: vec![vec![0.0; p]; p],
            anticopy: vec![vec![0.0; p]; p],
        }
    }

    pub fn p(&self) -> usize {
        self.r.len()
    }

    pub fn with_copy(mut self, j: usize, k: usize, rate: f64) -> Self {
        self.copy[j - 1][k - 1] = rate;
        self
    }

    pub fn with_anticopy(mut self, j: usize, k: usize, rate: f64) -> Self {
        self.anticopy[j - 1][k - 1] = rate;
        self
    }

    pub fn has_anticopy(&self) -> bool {
        self.anticopy.iter().flatten().any(|&a| a > 0.0)
    }

    fn validate(&self) -> Result<()> {
        let p = self.p();
        let bad = |what: &str| Err(Error::InvalidModel(what.to_string()));
        if self.alpha.len() != p || self.copy.len() != p || self.anticopy.len() != p {
            return bad("structured boundary: r, alpha, c, a must all have length p");
        }
        for (j, (&r, &a)) in self.r.iter().zip(&self.alpha).enumerate() {
            if !(r.is_finite() && r >= 0.0) {
                return bad(&format!("r[{}] must be finite and >= 0", j + 1));
            }
            if !(0.0..=1.0).contains(&a) {
                return bad(&format!("alpha[{}] must lie in [0,1]", j + 1));
            }
        }
        for (name, m) in [("c", &self.copy), ("a", &self.anticopy)] {
            for (j, row) in m.iter().enumerate() {
                if row.len() != p {
                    return bad(&format!("{name} must be a p x p matrix"));
                }
                for (k, &v) in row.iter().enumerate() {
                    if !(v.is_finite() && v >= 0.0) {
                        return bad(&format!(
                            "{name}[{}][{}] must be finite and >= 0",
                            j + 1,
                            k + 1
                        ));
                    }
                    if j == k && v != 0.0 {
                        return bad(&format!("{name} must have a zero diagonal"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Flip rate of site `j` (1-based) given the block occupations `block[0..p]`.
    ///
    /// Copy fires when `j` and `k` disagree, anticopy when they agree.
    pub fn flip_rate(&self, block: &[u8], j: usize) -> f64 {
        let x = block[j - 1] as f64;
        let i = j - 1;
        let mut rate = self.r[i] * (self.alpha[i] * (1.0 - x) + x * (1.0 - self.alpha[i]));
        for (k, &y) in block.iter().enumerate() {
            if k == i {
                continue;
            }
            let y = y as f64;
            rate += self.copy[i][k] * (x * (1.0 - y) + y * (1.0 - x));
            rate += self.anticopy[i][k] * (x * y + (1.0 - x) * (1.0 - y));
        }
        rate
    }

    /// Largest possible flip rate of any single block site.
    pub fn max_site_rate(&self) -> f64 {
        (0..self.p())
            .map(|i| {
                self.r[i] + self.copy[i].iter().sum::<f64>() + self.anticopy[i].iter().sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

/// Site 1 flips at a rate read from a table indexed by the block state.
///
/// Internally the block state `(eta_1, ..., eta_p)` is the integer
/// `sum eta_i 2^(i-1)`; textual keys are bit strings with site 1 leftmost.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTableBoundary {
    p: usize,
    rates: Vec<f64>,
}

impl RateTableBoundary {
    pub fn new(p: usize, rates: Vec<f64>) -> Result<Self> {
        if p == 0 || p > MAX_BLOCK_WIDTH {
            return Err(Error::InvalidModel(format!(
                "rate table width p = {p} out of range"
            )));
        }
        if rates.len() != 1 << p {
            return Err(Error::InvalidModel(format!(
                "rate table needs {} entries, got {}",
                1usize << p,
                rates.len()
            )));
        }
        if let Some(bad) = rates.iter().position(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::InvalidModel(format!(
                "rate table entry {} must be finite and >= 0",
                block_key(p, bad)
            )));
        }
        Ok(Self { p, rates })
    }

    /// Builds a table from any function of the block occupations.
    pub fn from_fn(p: usize, f: impl Fn(&[u8]) -> f64) -> Result<Self> {
        let rates = (0..1usize << p).map(|s| f(&block_bits(p, s))).collect();
        Self::new(p, rates)
    }

    pub fn from_keys(p: usize, table: &BTreeMap<String, f64>) -> Result<Self> {
        let mut rates = vec![f64::NAN; 1 << p];
        for (key, &v) in table {
            let s = parse_block_key(p, key)?;
            rates[s] = v;
        }
        if let Some(missing) = rates.iter().position(|r| r.is_nan()) {
            return Err(Error::InvalidModel(format!(
                "rate table missing key {}",
                block_key(p, missing)
            )));
        }
        Self::new(p, rates)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn rate_of_state(&self, state: usize) -> f64 {
        self.rates[state]
    }

    pub fn rate(&self, block: &[u8]) -> f64 {
        self.rates[block_index(block)]
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn to_keys(&self) -> BTreeMap<String, f64> {
        self.rates
            .iter()
            .enumerate()
            .map(|(s, &v)| (block_key(self.p, s), v))
            .collect()
    }
}

/// Block state index with site 1 as least significant bit.
pub fn block_index(block: &[u8]) -> usize {
    block
        .iter()
        .enumerate()
        .fold(0, |acc, (i, &b)| acc | ((b as usize) << i))
}

pub fn block_bits(p: usize, state: usize) -> Vec<u8> {
    (0..p).map(|i| ((state >> i) & 1) as u8).collect()
}

/// Bit-string key for a block state, site 1 leftmost.
pub fn block_key(p: usize, state: usize) -> String {
    (0..p)
        .map(|i| if (state >> i) & 1 == 1 { '1' } else { '0' })
        .collect()
}

pub fn parse_block_key(p: usize, key: &str) -> Result<usize> {
    if key.len() != p || !key.bytes().all(|b| b == b'0' || b == b'1') {
        return Err(Error::InvalidModel(format!(
            "block key {key:?} must be a {p}-bit binary string"
        )));
    }
    Ok(key
        .bytes()
        .enumerate()
        .fold(0, |acc, (i, b)| acc | (((b - b'0') as usize) << i)))
}

#[derive(Debug, Clone, PartialEq)]
pub enum LeftBoundary {
    Structured(StructuredBoundary),
    Table(RateTableBoundary),
}

impl LeftBoundary {
    pub fn p(&self) -> usize {
        match self {
            LeftBoundary::Structured(b) => b.p(),
            LeftBoundary::Table(t) => t.p(),
        }
    }

    /// Flip rate of block site `j` given the block occupations.
    pub fn flip_rate(&self, block: &[u8], j: usize) -> f64 {
        match self {
            LeftBoundary::Structured(b) => b.flip_rate(block, j),
            LeftBoundary::Table(t) if j == 1 => t.rate(block),
            LeftBoundary::Table(_) => 0.0,
        }
    }

    pub fn structured(&self) -> Option<&StructuredBoundary> {
        match self {
            LeftBoundary::Structured(b) => Some(b),
            LeftBoundary::Table(_) => None,
        }
    }

    pub fn max_site_rate(&self) -> f64 {
        match self {
            LeftBoundary::Structured(b) => b.max_site_rate(),
            LeftBoundary::Table(t) => t.rates.iter().cloned().fold(0.0, f64::max),
        }
    }
}

/// A complete model: lattice, right reservoir density and left mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct ModelSpec {
    pub lattice: LatticeSpec,
    pub beta: f64,
    pub left: LeftBoundary,
}

impl ModelSpec {
    pub fn new(lattice: LatticeSpec, beta: f64, left: LeftBoundary) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::InvalidModel(format!("beta = {beta} outside [0,1]")));
        }
        if left.p() != lattice.p() {
            return Err(Error::InvalidModel(format!(
                "left boundary has width {} but lattice block width is {}",
                left.p(),
                lattice.p()
            )));
        }
        if let LeftBoundary::Structured(b) = &left {
            b.validate()?;
        }
        Ok(Self {
            lattice,
            beta,
            left,
        })
    }

    pub fn structured(n: usize, beta: f64, left: StructuredBoundary) -> Result<Self> {
        let lattice = LatticeSpec::new(n, left.p())?;
        Self::new(lattice, beta, LeftBoundary::Structured(left))
    }

    pub fn table(n: usize, beta: f64, table: RateTableBoundary) -> Result<Self> {
        let lattice = LatticeSpec::new(n, table.p())?;
        Self::new(lattice, beta, LeftBoundary::Table(table))
    }

    /// Same boundary mechanisms on a lattice of a different size.
    pub fn with_n(&self, n: usize) -> Result<Self> {
        Self::new(
            LatticeSpec::new(n, self.lattice.p())?,
            self.beta,
            self.left.clone(),
        )
    }

    pub fn n(&self) -> usize {
        self.lattice.n()
    }

    pub fn p(&self) -> usize {
        self.lattice.p()
    }

    pub fn sites(&self) -> usize {
        self.lattice.sites()
    }

    pub fn right_flip_rate(&self, last: u8) -> f64 {
        if last == 0 {
            self.beta
        } else {
            1.0 - self.beta
        }
    }

    /// Upper bound on the total microscopic jump rate out of any configuration.
    pub fn max_total_rate(&self) -> f64 {
        (self.n() - 2) as f64 + 1.0 + self.p() as f64 * self.left.max_site_rate()
    }

    /// Syntax errors come back as `Json`, rejected values as `InvalidModel`.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawSpec = serde_json::from_str(text)?;
        raw.try_into()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model spec serializes")
    }
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    #[serde(rename = "N")]
    n: usize,
    p: usize,
    beta: f64,
    left: RawLeft,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLeft {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    r: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    table: Option<BTreeMap<String, f64>>,
}

impl TryFrom<RawSpec> for ModelSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        let lattice = LatticeSpec::new(raw.n, raw.p)?;
        let p = raw.p;
        let left = match raw.left.kind.as_str() {
            "structured" => {
                let r = raw.left.r.ok_or_else(|| {
                    Error::InvalidModel("structured boundary needs left.r".into())
                })?;
                let alpha = raw.left.alpha.ok_or_else(|| {
                    Error::InvalidModel("structured boundary needs left.alpha".into())
                })?;
                if r.len() != p {
                    return Err(Error::InvalidModel(format!("left.r must have {p} entries")));
                }
                let zeros = vec![vec![0.0; p]; p];
                LeftBoundary::Structured(StructuredBoundary {
                    r,
                    alpha,
                    copy: raw.left.c.unwrap_or_else(|| zeros.clone()),
                    anticopy: raw.left.a.unwrap_or(zeros),
                })
            }
            "table" => {
                let table = raw
                    .left
                    .table
                    .ok_or_else(|| Error::InvalidModel("table boundary needs left.table".into()))?;
                LeftBoundary::Table(RateTableBoundary::from_keys(p, &table)?)
            }
            other => {
                return Err(Error::InvalidModel(format!(
                    "left.kind must be \"structured\" or \"table\", got {other:?}"
                )))
            }
        };
        ModelSpec::new(lattice, raw.beta, left)
    }
}

impl From<ModelSpec> for RawSpec {
    fn from(spec: ModelSpec) -> Self {
        let left = match spec.left {
            LeftBoundary::Structured(b) => RawLeft {
                kind: "structured".into(),
                r: Some(b.r),
                alpha: Some(b.alpha),
                c: Some(b.copy),
                a: Some(b.anticopy),
                table: None,
            },
            LeftBoundary::Table(t) => RawLeft {
                kind: "table".into(),
                r: None,
                alpha: None,
                c: None,
                a: None,
                table: Some(t.to_keys()),
            },
        };
        RawSpec {
            n: spec.lattice.n(),
            p: spec.lattice.p(),
            beta: spec.beta,
            left,
        }
    }
}

/// Occupation vector on `{1, ..., N-1}`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    occ: Vec<u8>,
}

impl Configuration {
    pub fn empty(sites: usize) -> Self {
        Self {
            occ: vec![0; sites],
        }
    }

    pub fn full(sites: usize) -> Self {
        Self {
            occ: vec![1; sites],
        }
    }

    pub fn from_occupancy(occ: Vec<u8>) -> Result<Self> {
        contract!(occ.iter().all(|&b| b <= 1), "occupations must be 0 or 1");
        Ok(Self { occ })
    }

    /// Parses a bit string with site 1 first, e.g. `"101"`.
    pub fn from_bits(bits: &str) -> Result<Self> {
        contract!(
            bits.bytes().all(|b| b == b'0' || b == b'1'),
            "configuration string {bits:?} must contain only 0 and 1"
        );
        Ok(Self {
            occ: bits.bytes().map(|b| b - b'0').collect(),
        })
    }

    /// Configuration whose site `k` holds bit `k-1` of `index`.
    pub fn from_index(index: usize, sites: usize) -> Self {
        Self {
            occ: (0..sites).map(|i| ((index >> i) & 1) as u8).collect(),
        }
    }

    pub fn index(&self) -> usize {
        block_index(&self.occ)
    }

    pub fn sites(&self) -> usize {
        self.occ.len()
    }

    /// Occupation of site `k` (1-based).
    pub fn get(&self, k: usize) -> u8 {
        self.occ[k - 1]
    }

    pub fn set(&mut self, k: usize, value: u8) {
        self.occ[k - 1] = value;
    }

    /// Occupations of sites `1..=p`.
    pub fn block(&self, p: usize) -> &[u8] {
        &self.occ[..p]
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.occ
    }

    pub fn particles(&self) -> usize {
        self.occ.iter().map(|&b| b as usize).sum()
    }

    fn check(&self, k: usize) -> Result<()> {
        contract!(
            (1..=self.occ.len()).contains(&k),
            "site {k} outside 1..={}",
            self.occ.len()
        );
        Ok(())
    }

    pub(crate) fn apply(&mut self, mv: Move) {
        match mv {
            Move::Swap(k) => self.occ.swap(k - 1, k),
            Move::Flip(k) => self.occ[k - 1] ^= 1,
        }
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.occ {
            f.write_str(if b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Configuration({self})")
    }
}

/// `sigma^{k,l} eta`: exchange the occupations of sites `k` and `l`.
pub fn swap(cfg: &Configuration, k: usize, l: usize) -> Result<Configuration> {
    cfg.check(k)?;
    cfg.check(l)?;
    contract!(k != l, "swap needs two distinct sites, got {k} twice");
    let mut out = cfg.clone();
    out.occ.swap(k - 1, l - 1);
    Ok(out)
}

/// `sigma^k eta`: flip the occupation of site `k`.
pub fn flip(cfg: &Configuration, k: usize) -> Result<Configuration> {
    cfg.check(k)?;
    let mut out = cfg.clone();
    out.occ[k - 1] ^= 1;
    Ok(out)
}

/// An elementary jump of the particle system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Move {
    /// Exchange sites `k` and `k + 1`.
    Swap(usize),
    /// Flip site `k`.
    Flip(usize),
}

impl Move {
    pub fn apply_to(&self, cfg: &Configuration) -> Configuration {
        let mut out = cfg.clone();
        out.apply(*self);
        out
    }

    pub fn touches(&self, site: usize) -> bool {
        match *self {
            Move::Swap(k) => site == k || site == k + 1,
            Move::Flip(k) => site == k,
        }
    }
}

fn push_left(cfg: &Configuration, spec: &ModelSpec, out: &mut Vec<(Move, f64)>) {
    let p = spec.p();
    let block = cfg.block(p);
    for j in 1..=p {
        let rate = spec.left.flip_rate(block, j);
        if rate > 0.0 {
            out.push((Move::Flip(j), rate));
        }
    }
}

fn push_right(cfg: &Configuration, spec: &ModelSpec, out: &mut Vec<(Move, f64)>) {
    let last = spec.sites();
    let rate = spec.right_flip_rate(cfg.get(last));
    if rate > 0.0 {
        out.push((Move::Flip(last), rate));
    }
}

fn check_cfg(cfg: &Configuration, spec: &ModelSpec) -> Result<()> {
    contract!(
        cfg.sites() == spec.sites(),
        "configuration has {} sites, model expects {}",
        cfg.sites(),
        spec.sites()
    );
    Ok(())
}

/// Every jump with strictly positive rate out of `cfg`.
///
/// Left-block flips caused by several mechanisms at the same site are merged
/// into a single move; flips at site `N-1` (right reservoir) and at block
/// sites are distinct moves even if they share a site (only when `p = N-2`).
pub fn transitions(cfg: &Configuration, spec: &ModelSpec) -> Result<Vec<(Move, f64)>> {
    check_cfg(cfg, spec)?;
    let mut out = Vec::with_capacity(spec.sites() + spec.p());
    for k in 1..spec.sites() {
        if cfg.get(k) != cfg.get(k + 1) {
            out.push((Move::Swap(k), 1.0));
        }
    }
    push_right(cfg, spec, &mut out);
    push_left(cfg, spec, &mut out);
    Ok(out)
}

/// The subset of [`transitions`] whose move changes at least one of `sites`.
pub fn transitions_touching(
    cfg: &Configuration,
    spec: &ModelSpec,
    sites: &[usize],
) -> Result<Vec<(Move, f64)>> {
    check_cfg(cfg, spec)?;
    let n1 = spec.sites();
    let mut out = Vec::new();
    let mut bonds: Vec<usize> = sites
        .iter()
        .flat_map(|&s| [s.saturating_sub(1), s])
        .filter(|&b| b >= 1 && b < n1)
        .collect();
    bonds.sort_unstable();
    bonds.dedup();
    for k in bonds {
        if cfg.get(k) != cfg.get(k + 1) {
            out.push((Move::Swap(k), 1.0));
        }
    }
    if sites.contains(&n1) {
        push_right(cfg, spec, &mut out);
    }
    let p = spec.p();
    if sites.iter().any(|&s| s <= p) {
        let block = cfg.block(p);
        for &j in sites.iter().filter(|&&s| s <= p) {
            let rate = spec.left.flip_rate(block, j);
            if rate > 0.0 {
                out.push((Move::Flip(j), rate));
            }
        }
    }
    Ok(out)
}

/// Draws from the product measure with marginals `rho_0(k/N)`.
pub fn sample_initial(profile: &InitialProfile, lattice: LatticeSpec, seed: u64) -> Configuration {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_initial_with(profile, lattice, &mut rng)
}

pub fn sample_initial_with<R: Rng + ?Sized>(
    profile: &InitialProfile,
    lattice: LatticeSpec,
    rng: &mut R,
) -> Configuration {
    let n = lattice.n() as f64;
    let occ = (1..=lattice.sites())
        .map(|k| {
            let rho = profile.eval(k as f64 / n).clamp(0.0, 1.0);
            u8::from(rng.random::<f64>() < rho)
        })
        .collect();
    Configuration { occ }
}
