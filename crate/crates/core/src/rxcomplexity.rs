//! Exact receiver operation-count models for the two schemes.
//!
//! Successive interference cancellation with an MMSE front end costs
//! `(L_T^3 + 2 L_T^2) * G * (L_T - 1)` operations for `G` subcarriers per
//! user and `L_T` superimposed signals per subcarrier. Message-passing
//! decoding over a codebook set of size `|pi|` with at most `d` signals per
//! subcarrier costs `I_T * |pi|^d` for `I_T` iterations. Counts are exact
//! integers so reference values can be audited, not big-O classes.

use crate::{Error, Result};

/// Parameters for one audit row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComplexityParams {
    /// Subcarrier count the codebook set is built over.
    pub n: u64,
    /// Subcarriers per codebook.
    pub u: u64,
    /// Maximum signals superimposed on a subcarrier in the factor graph.
    pub d: u64,
    /// Maximum superimposed signals per subcarrier on the SIC side.
    pub l_t: u64,
    /// Subcarriers assigned to each user.
    pub g: u64,
    /// Message-passing iteration count.
    pub i_t: u64,
    /// Codebook set size; `binomial(n, u)` when derived.
    pub pi_size: u64,
    /// Externally quoted SIC count to audit against, if any.
    pub quoted_sic: Option<u128>,
    /// Externally quoted MPA count to audit against, if any.
    pub quoted_mpa: Option<u128>,
}

impl ComplexityParams {
    /// Builds params with `pi_size` derived as `binomial(n, u)`.
    pub fn derived(n: u64, u: u64, d: u64, l_t: u64, g: u64, i_t: u64) -> Result<Self> {
        if u == 0 || u > n {
            return Err(Error::InvalidArgument(format!(
                "codebook size {u} must lie in 1..={n}"
            )));
        }
        if d == 0 || l_t == 0 || g == 0 || i_t == 0 {
            return Err(Error::InvalidArgument("all counts must be at least 1".into()));
        }
        let pi = binomial(n, u)?;
        let pi_size = u64::try_from(pi)
            .map_err(|_| Error::Overflow(format!("binomial({n}, {u}) exceeds u64")))?;
        Ok(ComplexityParams { n, u, d, l_t, g, i_t, pi_size, quoted_sic: None, quoted_mpa: None })
    }

    /// Attaches quoted reference counts for auditing.
    pub fn with_quoted(mut self, sic: u128, mpa: u128) -> Self {
        self.quoted_sic = Some(sic);
        self.quoted_mpa = Some(mpa);
        self
    }
}

/// Exact binomial coefficient `C(n, k)` with overflow checking.
pub fn binomial(n: u64, k: u64) -> Result<u128> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc
            .checked_mul((n - i) as u128)
            .ok_or_else(|| Error::Overflow(format!("binomial({n}, {k})")))?;
        acc /= (i + 1) as u128;
    }
    Ok(acc)
}

/// Operation count of the SIC receiver: `(L_T^3 + 2 L_T^2) * G * (L_T - 1)`.
///
/// One superimposed signal means nothing to cancel, so the count is 0.
pub fn sic_complexity(l_t: u64, g: u64) -> Result<u128> {
    if l_t == 0 || g == 0 {
        return Err(Error::InvalidArgument("l_t and g must be at least 1".into()));
    }
    let l = l_t as u128;
    let cube_plus = l
        .checked_mul(l)
        .and_then(|l2| l2.checked_mul(l + 2))
        .ok_or_else(|| Error::Overflow(format!("sic_complexity({l_t}, {g})")))?;
    cube_plus
        .checked_mul(g as u128)
        .and_then(|v| v.checked_mul(l - 1))
        .ok_or_else(|| Error::Overflow(format!("sic_complexity({l_t}, {g})")))
}

/// Operation count of the message-passing receiver: `I_T * pi_size^d`.
pub fn mpa_complexity(pi_size: u64, d: u64, i_t: u64) -> Result<u128> {
    if pi_size == 0 || d == 0 || i_t == 0 {
        return Err(Error::InvalidArgument("all arguments must be at least 1".into()));
    }
    let overflow = || Error::Overflow(format!("mpa_complexity({pi_size}, {d}, {i_t})"));
    let d32 = u32::try_from(d).map_err(|_| overflow())?;
    (pi_size as u128)
        .checked_pow(d32)
        .and_then(|v| v.checked_mul(i_t as u128))
        .ok_or_else(overflow)
}

/// One audited row: formula counts plus any disagreements with the quoted
/// values.
#[derive(Debug, Clone)]
pub struct AuditRow {
    /// Input parameters.
    pub params: ComplexityParams,
    /// SIC count from the formula.
    pub sic_ops: u128,
    /// MPA count from the formula.
    pub mpa_ops: u128,
    /// Disagreements between formula and quoted values.
    pub discrepancies: Vec<Discrepancy>,
}

/// A quoted count that disagrees with the formula, with a reconciliation
/// note when the quoted value matches a recognizable variant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Discrepancy {
    /// Which receiver the disagreement concerns.
    pub receiver: Receiver,
    /// Value from the formula at the row's parameters.
    pub formula: u128,
    /// The quoted value.
    pub quoted: u128,
    /// Explanation of the closest matching variant, if one was found.
    pub note: String,
}

/// Receiver family of a complexity count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Receiver {
    /// Successive interference cancellation (power-domain scheme).
    Sic,
    /// Message passing (sparse-codebook scheme).
    Mpa,
}

/// Evaluates both formulas for every row and flags quoted values that
/// disagree. Empty input produces an empty table.
pub fn complexity_table(rows: &[ComplexityParams]) -> Result<Vec<AuditRow>> {
    rows.iter()
        .map(|params| {
            let sic_ops = sic_complexity(params.l_t, params.g)?;
            let mpa_ops = mpa_complexity(params.pi_size, params.d, params.i_t)?;
            let mut discrepancies = Vec::new();
            if let Some(quoted) = params.quoted_sic {
                if quoted != sic_ops {
                    let mut note = String::new();
                    if params.l_t >= 2 && quoted == sic_ops / (params.l_t as u128 - 1) * params.l_t as u128 {
                        note = format!(
                            "quoted value multiplies by L_T = {} instead of L_T - 1",
                            params.l_t
                        );
                    }
                    discrepancies.push(Discrepancy {
                        receiver: Receiver::Sic,
                        formula: sic_ops,
                        quoted,
                        note,
                    });
                }
            }
            if let Some(quoted) = params.quoted_mpa {
                if quoted != mpa_ops {
                    let mut note = String::new();
                    for d_alt in 1..params.d {
                        if mpa_complexity(params.pi_size, d_alt, params.i_t)? == quoted {
                            note = format!("quoted value matches the formula at d = {d_alt}");
                            break;
                        }
                    }
                    discrepancies.push(Discrepancy {
                        receiver: Receiver::Mpa,
                        formula: mpa_ops,
                        quoted,
                        note,
                    });
                }
            }
            Ok(AuditRow { params: params.clone(), sic_ops, mpa_ops, discrepancies })
        })
        .collect()
}

/// The two reference configurations shipped with the tool, quoted counts
/// attached. Row 1 agrees with the formulas; row 2 disagrees on both
/// receivers and is flagged by [`complexity_table`].
pub fn reference_rows() -> Vec<ComplexityParams> {
    vec![
        ComplexityParams::derived(8, 2, 3, 3, 4, 3)
            .expect("static row")
            .with_quoted(360, 65_856),
        ComplexityParams::derived(10, 3, 4, 4, 5, 3)
            .expect("static row")
            .with_quoted(1_920, 5_184_000),
    ]
}

/// Renders an audit table as aligned plain text.
pub fn render_text(rows: &[AuditRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:>4} {:>3} {:>3} {:>4} {:>4} {:>4} {:>8} {:>16} {:>16}  flags\n",
        "N", "U", "d", "L_T", "G", "I_T", "|pi|", "sic_ops", "mpa_ops"
    ));
    for r in rows {
        let p = &r.params;
        let flags = if r.discrepancies.is_empty() {
            "ok".to_string()
        } else {
            r.discrepancies
                .iter()
                .map(|d| {
                    let kind = match d.receiver {
                        Receiver::Sic => "sic",
                        Receiver::Mpa => "mpa",
                    };
                    if d.note.is_empty() {
                        format!("{kind}: quoted {} != {}", d.quoted, d.formula)
                    } else {
                        format!("{kind}: quoted {} != {} ({})", d.quoted, d.formula, d.note)
                    }
                })
                .collect::<Vec<_>>()
                .join("; ")
        };
        out.push_str(&format!(
            "{:>4} {:>3} {:>3} {:>4} {:>4} {:>4} {:>8} {:>16} {:>16}  {flags}\n",
            p.n, p.u, p.d, p.l_t, p.g, p.i_t, p.pi_size, r.sic_ops, r.mpa_ops
        ));
    }
    out
}

/// Renders an audit table as CSV.
pub fn render_csv(rows: &[AuditRow]) -> String {
    let mut out =
        String::from("n,u,d,l_t,g,i_t,pi_size,sic_ops,mpa_ops,quoted_sic,quoted_mpa,flags\n");
    for r in rows {
        let p = &r.params;
        let opt = |v: Option<u128>| v.map(|x| x.to_string()).unwrap_or_default();
        let flags = r
            .discrepancies
            .iter()
            .map(|d| match d.receiver {
                Receiver::Sic => "sic",
                Receiver::Mpa => "mpa",
            })
            .collect::<Vec<_>>()
            .join("+");
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            p.n,
            p.u,
            p.d,
            p.l_t,
            p.g,
            p.i_t,
            p.pi_size,
            r.sic_ops,
            r.mpa_ops,
            opt(p.quoted_sic),
            opt(p.quoted_mpa),
            flags
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sic_reference_values() {
        assert_eq!(sic_complexity(3, 4).unwrap(), 360);
        assert_eq!(sic_complexity(4, 5).unwrap(), 1_440);
        // A single signal has no interference to cancel.
        assert_eq!(sic_complexity(1, 7).unwrap(), 0);
    }

    #[test]
    fn mpa_reference_values() {
        assert_eq!(mpa_complexity(28, 3, 3).unwrap(), 65_856);
        assert_eq!(mpa_complexity(2, 1, 1).unwrap(), 2);
        assert_eq!(mpa_complexity(120, 3, 3).unwrap(), 5_184_000);
        assert_eq!(mpa_complexity(120, 4, 3).unwrap(), 622_080_000);
    }

    #[test]
    fn mpa_overflow_detected() {
        assert!(matches!(mpa_complexity(1_000_000, 7, 1_000_000_000), Err(Error::Overflow(_))));
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(8, 2).unwrap(), 28);
        assert_eq!(binomial(10, 3).unwrap(), 120);
        assert_eq!(binomial(4, 2).unwrap(), 6);
        assert_eq!(binomial(5, 5).unwrap(), 1);
        assert_eq!(binomial(3, 5).unwrap(), 0);
    }

    #[test]
    fn sic_strictly_increasing() {
        for l in 2..8u64 {
            for g in 1..6u64 {
                let base = sic_complexity(l, g).unwrap();
                assert!(sic_complexity(l + 1, g).unwrap() > base);
                assert!(sic_complexity(l, g + 1).unwrap() > base);
            }
        }
    }

    #[test]
    fn mpa_linear_in_iterations() {
        for i_t in 1..10u64 {
            let r = mpa_complexity(28, 3, i_t).unwrap() / mpa_complexity(28, 3, 1).unwrap();
            assert_eq!(r, i_t as u128);
        }
    }

    #[test]
    fn reference_row_one_is_clean() {
        let table = complexity_table(&reference_rows()).unwrap();
        assert_eq!(table[0].sic_ops, 360);
        assert_eq!(table[0].mpa_ops, 65_856);
        assert!(table[0].discrepancies.is_empty());
        // MPA decoding costs ~183x the SIC receiver in this configuration.
        let ratio = table[0].mpa_ops as f64 / table[0].sic_ops as f64;
        assert!((ratio - 182.933).abs() < 1e-2);
        assert!(table[0].mpa_ops > table[0].sic_ops);
    }

    #[test]
    fn reference_row_two_flags_both_receivers() {
        let table = complexity_table(&reference_rows()).unwrap();
        let row = &table[1];
        assert_eq!(row.sic_ops, 1_440);
        assert_eq!(row.mpa_ops, 622_080_000);
        assert_eq!(row.discrepancies.len(), 2);
        let sic = row.discrepancies.iter().find(|d| d.receiver == Receiver::Sic).unwrap();
        assert_eq!(sic.quoted, 1_920);
        assert!(sic.note.contains("L_T"));
        let mpa = row.discrepancies.iter().find(|d| d.receiver == Receiver::Mpa).unwrap();
        assert_eq!(mpa.quoted, 5_184_000);
        assert!(mpa.note.contains("d = 3"));
    }

    #[test]
    fn empty_table() {
        assert!(complexity_table(&[]).unwrap().is_empty());
    }

    #[test]
    fn renders_include_flags() {
        let table = complexity_table(&reference_rows()).unwrap();
        let text = render_text(&table);
        assert!(text.contains("ok"));
        assert!(text.contains("quoted 1920"));
        let csv = render_csv(&table);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().nth(2).unwrap().contains("sic+mpa"));
    }
}
