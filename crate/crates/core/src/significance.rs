//! Gate significance: the phi coefficient between a gate's Boolean
//! expression and the event it is meant to explain.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bits::BitColumn;
use crate::error::{Error, Result};

/// 2×2 joint counts. The first index is the output event, the second the
/// gate expression: `n10` counts rows where the output is 1 and the
/// expression 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub n11: u64,
    pub n10: u64,
    pub n01: u64,
    pub n00: u64,
}

impl ContingencyTable {
    pub fn total(&self) -> u64 {
        self.n11 + self.n10 + self.n01 + self.n00
    }

    pub fn transpose(&self) -> Self {
        ContingencyTable {
            n11: self.n11,
            n10: self.n01,
            n01: self.n10,
            n00: self.n00,
        }
    }

    pub fn scaled(&self, k: u64) -> Self {
        ContingencyTable {
            n11: self.n11 * k,
            n10: self.n10 * k,
            n01: self.n01 * k,
            n00: self.n00 * k,
        }
    }

    /// From marginal counts over the jointly valid rows.
    fn from_marginals(total: u64, out_ones: u64, expr_ones: u64, both: u64) -> Self {
        ContingencyTable {
            n11: both,
            n10: out_ones - both,
            n01: expr_ones - both,
            n00: total + both - out_ones - expr_ones,
        }
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Phi coefficient of a 2×2 table; 0 when any marginal is empty.
///
/// The table is first reduced by the gcd of its cells, so scaling every
/// cell by the same factor yields a bit-identical result. A perfect
/// (anti-)association is detected in integer arithmetic and returned as
/// exactly ±1.
pub fn phi(t: &ContingencyTable) -> f64 {
    let g = gcd(gcd(t.n11, t.n10), gcd(t.n01, t.n00));
    if g == 0 {
        return 0.0;
    }
    let (a, b, c, d) = (
        (t.n11 / g) as u128,
        (t.n10 / g) as u128,
        (t.n01 / g) as u128,
        (t.n00 / g) as u128,
    );
    let margins = (a + b) * (c + d) * (a + c) * (b + d);
    if margins == 0 {
        return 0.0;
    }
    let (pos, neg) = (a * d, b * c);
    let (num, sign) = if pos >= neg { (pos - neg, 1.0) } else { (neg - pos, -1.0) };
    if num * num == margins {
        return sign;
    }
    let r = sign * num as f64 / (margins as f64).sqrt();
    r.clamp(-1.0, 1.0)
}

/// `(sign, num, margins)` with `phi = sign * num / sqrt(margins)`, or `None`
/// when a marginal is empty (phi = 0).
fn phi_parts(t: &ContingencyTable) -> Option<(i8, u128, u128)> {
    let (a, b, c, d) = (t.n11 as u128, t.n10 as u128, t.n01 as u128, t.n00 as u128);
    let margins = (a + b) * (c + d) * (a + c) * (b + d);
    if margins == 0 {
        return None;
    }
    let (pos, neg) = (a * d, b * c);
    Some(match pos.cmp(&neg) {
        Ordering::Greater => (1, pos - neg, margins),
        Ordering::Less => (-1, neg - pos, margins),
        Ordering::Equal => (0, 0, margins),
    })
}

/// Full 256-bit product of two u128 values as (high, low).
fn mul_wide(x: u128, y: u128) -> (u128, u128) {
    const LO: u128 = u64::MAX as u128;
    let (x1, x0) = (x >> 64, x & LO);
    let (y1, y0) = (y >> 64, y & LO);
    let p00 = x0 * y0;
    let p01 = x0 * y1;
    let p10 = x1 * y0;
    let p11 = x1 * y1;
    let mid = (p00 >> 64) + (p01 & LO) + (p10 & LO);
    let low = (p00 & LO) | (mid << 64);
    let high = p11 + (p01 >> 64) + (p10 >> 64) + (mid >> 64);
    (high, low)
}

/// Orders two tables by their phi coefficient using exact integer
/// arithmetic, so mathematically equal coefficients compare equal.
pub fn cmp_phi(a: &ContingencyTable, b: &ContingencyTable) -> Ordering {
    let (sa, na, ma) = phi_parts(a).unwrap_or((0, 0, 1));
    let (sb, nb, mb) = phi_parts(b).unwrap_or((0, 0, 1));
    if sa != sb || sa == 0 {
        return sa.cmp(&sb);
    }
    // |phi_a| vs |phi_b|  <=>  na^2 * mb vs nb^2 * ma; num^2 <= margins, so
    // each square fits whenever margins does
    let lhs = mul_wide(na * na, mb);
    let rhs = mul_wide(nb * nb, ma);
    let magnitude = lhs.cmp(&rhs);
    if sa > 0 {
        magnitude
    } else {
        magnitude.reverse()
    }
}

/// Joint counts of `output` (first index) against `expr` over rows where
/// both are present.
pub fn contingency(output: &BitColumn, expr: &BitColumn) -> Result<ContingencyTable> {
    if output.len() != expr.len() {
        return Err(Error::LengthMismatch {
            column: "expression".into(),
            expected: output.len(),
            found: expr.len(),
        });
    }
    let mut total = 0u64;
    let mut out_ones = 0u64;
    let mut expr_ones = 0u64;
    let mut both = 0u64;
    let words = output
        .values_words()
        .iter()
        .zip(output.valid_words())
        .zip(expr.values_words().iter().zip(expr.valid_words()));
    for ((&ov, &om), (&ev, &em)) in words {
        let m = om & em;
        total += m.count_ones() as u64;
        out_ones += (ov & m).count_ones() as u64;
        expr_ones += (ev & m).count_ones() as u64;
        both += (ov & ev & m).count_ones() as u64;
    }
    if total == 0 {
        return Err(Error::NoJointRows);
    }
    Ok(ContingencyTable::from_marginals(total, out_ones, expr_ones, both))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateType {
    And,
    Or,
}

impl GateType {
    pub const ALL: [GateType; 2] = [GateType::And, GateType::Or];

    pub fn as_str(self) -> &'static str {
        match self {
            GateType::And => "AND",
            GateType::Or => "OR",
        }
    }

    pub fn apply(self, inputs: &[bool]) -> bool {
        match self {
            GateType::And => inputs.iter().all(|b| *b),
            GateType::Or => inputs.iter().any(|b| *b),
        }
    }
}

impl fmt::Display for GateType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GateType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "AND" | "and" => Ok(GateType::And),
            "OR" | "or" => Ok(GateType::Or),
            other => Err(Error::Config(format!("unsupported gate type `{other}`"))),
        }
    }
}

/// A proposed gate: type plus indices of its inputs in some candidate list.
#[derive(Debug, Clone, PartialEq)]
pub struct GateCandidate {
    pub gate_type: GateType,
    pub inputs: Vec<usize>,
    pub significance: f64,
    /// Output event against gate expression.
    pub table: ContingencyTable,
}

/// Elementwise AND/OR of the input columns. A row with any missing input
/// is missing in the result.
pub fn eval_gate(gate_type: GateType, inputs: &[&BitColumn]) -> Result<BitColumn> {
    if inputs.len() < 2 {
        return Err(Error::GateArity(inputs.len()));
    }
    let len = inputs[0].len();
    if let Some(bad) = inputs.iter().find(|c| c.len() != len) {
        return Err(Error::LengthMismatch {
            column: "gate input".into(),
            expected: len,
            found: bad.len(),
        });
    }
    let nwords = inputs[0].values_words().len();
    let mut values = inputs[0].values_words().to_vec();
    let mut valid = inputs[0].valid_words().to_vec();
    for c in &inputs[1..] {
        for w in 0..nwords {
            values[w] = match gate_type {
                GateType::And => values[w] & c.values_words()[w],
                GateType::Or => values[w] | c.values_words()[w],
            };
            valid[w] &= c.valid_words()[w];
        }
    }
    Ok(BitColumn::from_words(len, values, valid))
}

/// Contingency of `output` against the gate expression without
/// materializing the expression column. Used in the search hot loop.
pub fn score_gate(gate_type: GateType, inputs: &[&BitColumn], output: &BitColumn) -> ContingencyTable {
    debug_assert!(inputs.len() >= 2);
    let mut total = 0u64;
    let mut out_ones = 0u64;
    let mut expr_ones = 0u64;
    let mut both = 0u64;
    let ov = output.values_words();
    let om = output.valid_words();
    for w in 0..ov.len() {
        let mut m = om[w];
        let mut e = match gate_type {
            GateType::And => !0u64,
            GateType::Or => 0u64,
        };
        for c in inputs {
            m &= c.valid_words()[w];
            e = match gate_type {
                GateType::And => e & c.values_words()[w],
                GateType::Or => e | c.values_words()[w],
            };
        }
        e &= m;
        total += m.count_ones() as u64;
        out_ones += (ov[w] & m).count_ones() as u64;
        expr_ones += e.count_ones() as u64;
        both += (ov[w] & e).count_ones() as u64;
    }
    ContingencyTable::from_marginals(total, out_ones, expr_ones, both)
}

/// Phi between `output` and the gate's expression over `columns`.
pub fn gate_significance(gate_type: GateType, columns: &[&BitColumn], output: &BitColumn) -> Result<f64> {
    let expr = eval_gate(gate_type, columns)?;
    Ok(phi(&contingency(output, &expr)?))
}
