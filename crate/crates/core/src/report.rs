//! Check reports: one record per verified inequality instance, with exact
//! left and right sides, the measured ratio, and the explicit constant when
//! the underlying estimate carries one.

use serde::{Deserialize, Serialize};

use crate::tol::BOUND_SLACK;

/// CSV column order; fixed for byte-stable output.
pub const CSV_HEADER: &str =
    "inequality_id,depth,seed,generator,p,q,r,rho,lambda,alpha,lhs,rhs,ratio,bound,pass";

/// A single verified inequality instance.
///
/// `rhs` is the product of norms without any constant; `ratio = lhs/rhs`
/// with the conventions `0/0 = 1` and `x/0 = ∞` for `x > 0`. When the
/// estimate has an explicit constant it is stored in `bound` and
/// `pass = ratio <= bound (1 + 1e-9)`; otherwise `pass` records that the
/// ratio is finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub inequality_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
    #[serde(with = "ratio_serde")]
    pub ratio: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckReport {
    /// Builds a report from exact sides, applying the ratio and pass rules.
    pub fn from_sides(id: &str, lhs: f64, rhs: f64, bound: Option<f64>) -> Self {
        // `+ 0.0` folds IEEE negative zeros into plain zeros
        let (lhs, rhs) = (lhs + 0.0, rhs + 0.0);
        let ratio = ratio_of(lhs, rhs);
        let pass = match bound {
            Some(b) => ratio <= b * (1.0 + BOUND_SLACK),
            None => ratio.is_finite(),
        };
        CheckReport {
            inequality_id: id.to_string(),
            depth: None,
            seed: None,
            generator: None,
            p: None,
            q: None,
            r: None,
            rho: None,
            lambda: None,
            alpha: None,
            lhs,
            rhs,
            ratio,
            bound,
            pass,
            note: None,
        }
    }

    pub fn with_exponents(mut self, p: Option<f64>, q: Option<f64>, r: Option<f64>) -> Self {
        self.p = p;
        self.q = q;
        self.r = r;
        self
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = Some(rho);
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// Attaches provenance of the generated inputs.
    pub fn with_meta(mut self, depth: Option<u32>, seed: Option<u64>, generator: Option<&str>) -> Self {
        self.depth = depth;
        self.seed = seed;
        self.generator = generator.map(str::to_string);
        self
    }
}

/// `lhs/rhs` with the degenerate-denominator conventions.
pub fn ratio_of(lhs: f64, rhs: f64) -> f64 {
    if rhs == 0.0 {
        if lhs == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        lhs / rhs
    }
}

mod ratio_serde {
    //! Serializes a possibly infinite ratio losslessly: finite values as
    //! numbers, infinity as the string `"inf"`.
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str("inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Prints a float with 17 significant digits, which round-trips `f64` exactly.
pub fn format_float(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{v:.16e}")
    }
}

fn opt_float(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

fn csv_row(r: &CheckReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.inequality_id,
        r.depth.map(|d| d.to_string()).unwrap_or_default(),
        r.seed.map(|s| s.to_string()).unwrap_or_default(),
        r.generator.as_deref().unwrap_or(""),
        opt_float(r.p),
        opt_float(r.q),
        opt_float(r.r),
        opt_float(r.rho),
        opt_float(r.lambda),
        opt_float(r.alpha),
        format_float(r.lhs),
        format_float(r.rhs),
        format_float(r.ratio),
        opt_float(r.bound),
        r.pass,
    )
}

/// Renders reports as CSV with the fixed column schema.
pub fn to_csv(reports: &[CheckReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&csv_row(r));
        out.push('\n');
    }
    out
}

/// Renders reports as a JSON array; every field round-trips losslessly.
pub fn to_json(reports: &[CheckReport]) -> crate::error::Result<String> {
    Ok(serde_json::to_string_pretty(reports)?)
}

pub fn from_json(text: &str) -> crate::error::Result<Vec<CheckReport>> {
    Ok(serde_json::from_str(text)?)
}

/// Orders reports by id and parameters so that parallel producers yield a
/// stable listing.
pub fn sort_reports(reports: &mut [CheckReport]) {
    let key = |r: &CheckReport| {
        (
            r.inequality_id.clone(),
            r.depth,
            r.seed,
            r.generator.clone(),
            r.p.map(f64::to_bits),
            r.q.map(f64::to_bits),
            r.rho.map(f64::to_bits),
            r.lambda.map(f64::to_bits),
            r.alpha.map(f64::to_bits),
        )
    };
    reports.sort_by_key(key);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_conventions() {
        assert_eq!(ratio_of(0.0, 0.0), 1.0);
        assert_eq!(ratio_of(2.0, 0.0), f64::INFINITY);
        assert_eq!(ratio_of(1.0, 2.0), 0.5);
    }

    #[test]
    fn pass_rules() {
        let r = CheckReport::from_sides("doob", 1.9, 1.0, Some(2.0));
        assert!(r.pass);
        let r = CheckReport::from_sides("doob", 2.1, 1.0, Some(2.0));
        assert!(!r.pass);
        let r = CheckReport::from_sides("lepingle", 3.0, 0.0, None);
        assert!(!r.pass && r.ratio.is_infinite());
    }

    #[test]
    fn json_round_trip_including_infinity() {
        let mut a = CheckReport::from_sides("thm_jump", 1.0, 0.0, None)
            .with_lambda(0.5)
            .with_meta(Some(4), Some(7), Some("rademacher"));
        a.note = Some("max_jump_count=3".into());
        let b = CheckReport::from_sides("doob", 1.5, 1.0, Some(2.0)).with_exponents(
            Some(2.0),
            None,
            None,
        );
        let text = to_json(&[a.clone(), b.clone()]).unwrap();
        let back = from_json(&text).unwrap();
        assert_eq!(back, vec![a, b]);
    }

    #[test]
    fn csv_schema_and_formatting() {
        let r = CheckReport::from_sides("doob", 1.0, 1.0, Some(2.0)).with_exponents(
            Some(2.0),
            None,
            None,
        );
        let text = to_csv(std::slice::from_ref(&r));
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        let row = lines.next().unwrap();
        assert!(row.starts_with("doob,,,"));
        assert!(row.ends_with(",true"));
        let reparsed: f64 = format_float(std::f64::consts::PI).parse().unwrap();
        assert_eq!(reparsed, std::f64::consts::PI);
    }

    #[test]
    fn sorting_is_stable_by_id_then_parameters() {
        let mut rows = vec![
            CheckReport::from_sides("b", 1.0, 1.0, None).with_rho(2.0),
            CheckReport::from_sides("a", 1.0, 1.0, None),
            CheckReport::from_sides("b", 1.0, 1.0, None).with_rho(1.0),
        ];
        sort_reports(&mut rows);
        assert_eq!(rows[0].inequality_id, "a");
        assert_eq!(rows[1].rho, Some(1.0));
        assert_eq!(rows[2].rho, Some(2.0));
    }
}

