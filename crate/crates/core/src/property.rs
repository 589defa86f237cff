//! Safety claims over polyhedral input regions, verdict documents and
//! witness replay.
//!
//! Every claim is stored in canonical form: maximize `objective·f(x)` over the
//! region and assert the maximum is `<= threshold`. A document may instead
//! declare `"sense": "min"` (meaning `min objective·f(x) >= threshold`); it is
//! negated into the canonical form at parse time.

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bounds::InputBox;
use crate::error::{Error, Result};
use crate::lp::{LinearConstraint, FEAS_TOL};
use crate::network::{dot, Network};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRegion {
    #[serde(rename = "box")]
    pub input_box: InputBox,
    #[serde(rename = "constraints", default)]
    pub linear_constraints: Vec<LinearConstraint>,
}

impl InputRegion {
    pub fn from_box(input_box: InputBox) -> Self {
        InputRegion {
            input_box,
            linear_constraints: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.input_box.dim()
    }

    pub fn validate(&self) -> Result<()> {
        self.input_box.validate()?;
        let n = self.dim();
        for (i, c) in self.linear_constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(Error::validation(
                    format!("constraints[{i}].coeffs"),
                    format!("length {} does not match input dimension {n}", c.coeffs.len()),
                ));
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|a| !a.is_finite()) {
                return Err(Error::validation(format!("constraints[{i}]"), "non-finite entry"));
            }
        }
        Ok(())
    }

    /// Box and rows satisfied within `tol`.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.input_box.contains(x, tol)
            && self.linear_constraints.iter().all(|c| c.violation(x) <= tol)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let region: InputRegion = serde_json::from_str(text)?;
        region.validate()?;
        Ok(region)
    }
}

/// Rejection sampling: uniform in the box, kept when the linear rows hold.
/// Gives up after `100 * n` draws, so thin regions may return fewer points.
pub fn sample_region<R: Rng>(region: &InputRegion, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let b = &region.input_box;
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n && attempts < 100 * n.max(1) {
        attempts += 1;
        let x: Vec<f64> = b
            .lo
            .iter()
            .zip(&b.hi)
            .map(|(l, h)| if l == h { *l } else { rng.random_range(*l..=*h) })
            .collect();
        if region.linear_constraints.iter().all(|c| c.violation(&x) <= FEAS_TOL) {
            out.push(x);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Max,
    Min,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ClaimDoc", into = "ClaimDoc")]
pub struct SafetyClaim {
    pub name: String,
    pub region: InputRegion,
    pub objective: Vec<f64>,
    pub threshold: f64,
}

#[derive(Serialize, Deserialize)]
struct ClaimDoc {
    name: String,
    #[serde(rename = "box")]
    input_box: InputBox,
    #[serde(default)]
    constraints: Vec<LinearConstraint>,
    objective: Vec<f64>,
    threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sense: Option<Sense>,
}

impl TryFrom<ClaimDoc> for SafetyClaim {
    type Error = Error;

    fn try_from(doc: ClaimDoc) -> Result<Self> {
        let (objective, threshold) = match doc.sense.unwrap_or(Sense::Max) {
            Sense::Max => (doc.objective, doc.threshold),
            Sense::Min => (doc.objective.iter().map(|c| -c).collect(), -doc.threshold),
        };
        let claim = SafetyClaim {
            name: doc.name,
            region: InputRegion {
                input_box: doc.input_box,
                linear_constraints: doc.constraints,
            },
            objective,
            threshold,
        };
        claim.validate()?;
        Ok(claim)
    }
}

impl From<SafetyClaim> for ClaimDoc {
    fn from(c: SafetyClaim) -> Self {
        ClaimDoc {
            name: c.name,
            input_box: c.region.input_box,
            constraints: c.region.linear_constraints,
            objective: c.objective,
            threshold: c.threshold,
            sense: None,
        }
    }
}

impl SafetyClaim {
    pub fn validate(&self) -> Result<()> {
        self.region.validate()?;
        if self.objective.is_empty() {
            return Err(Error::validation("objective", "must not be empty"));
        }
        if let Some(j) = self.objective.iter().position(|c| !c.is_finite()) {
            return Err(Error::validation(format!("objective[{j}]"), "non-finite"));
        }
        if !self.threshold.is_finite() {
            return Err(Error::validation("threshold", "must be finite"));
        }
        Ok(())
    }

    /// Checks the claim's dimensions against a concrete network.
    pub fn validate_for(&self, net: &Network) -> Result<()> {
        if self.region.dim() != net.input_dim() {
            return Err(Error::validation(
                "box",
                format!(
                    "dimension {} does not match network input dimension {}",
                    self.region.dim(),
                    net.input_dim()
                ),
            ));
        }
        if self.objective.len() != net.output_dim() {
            return Err(Error::validation(
                "objective",
                format!(
                    "length {} does not match network output count {}",
                    self.objective.len(),
                    net.output_dim()
                ),
            ));
        }
        Ok(())
    }

    pub fn evaluate(&self, net: &Network, x: &[f64]) -> Result<f64> {
        Ok(dot(&self.objective, &net.forward(x)?))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("claim serialization cannot fail")
    }
}

pub fn parse_claim(text: &str) -> Result<SafetyClaim> {
    let doc: ClaimDoc = serde_json::from_str(text)?;
    SafetyClaim::try_from(doc)
}

/// True iff `x` lies in the claim region (within 1e-7) and its exact forward
/// evaluation exceeds the threshold.
pub fn replay_witness(net: &Network, claim: &SafetyClaim, x: &[f64]) -> Result<bool> {
    if x.len() != net.input_dim() {
        return Err(Error::dims("witness", net.input_dim(), x.len()));
    }
    if x.len() != claim.region.dim() {
        return Err(Error::dims("witness vs region", claim.region.dim(), x.len()));
    }
    if !claim.region.contains(x, FEAS_TOL) {
        return Ok(false);
    }
    Ok(claim.evaluate(net, x)? > claim.threshold)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Proved,
    Violated,
    Unknown,
    RegionEmpty,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub nodes: usize,
    pub lp_solves: usize,
    pub time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub status: VerdictStatus,
    #[serde(with = "bound_serde")]
    pub upper_bound: f64,
    #[serde(with = "bound_serde")]
    pub lower_bound: f64,
    pub witness: Option<Vec<f64>>,
    pub stats: SolverStats,
}

impl Verdict {
    /// Checks the verdict invariants, replaying the witness when violated.
    pub fn check_invariants(&self, net: &Network, claim: &SafetyClaim) -> Result<()> {
        let fail = |m: String| Err(Error::validation("verdict", m));
        if self.status == VerdictStatus::RegionEmpty {
            return Ok(());
        }
        if self.lower_bound > self.upper_bound + 1e-6 {
            return fail(format!(
                "lower bound {} exceeds upper bound {}",
                self.lower_bound, self.upper_bound
            ));
        }
        match self.status {
            VerdictStatus::Proved if self.upper_bound > claim.threshold => fail(format!(
                "proved with upper bound {} above threshold {}",
                self.upper_bound, claim.threshold
            )),
            VerdictStatus::Violated => match &self.witness {
                Some(w) if replay_witness(net, claim, w)? => Ok(()),
                Some(_) => fail("witness does not replay".into()),
                None => fail("violated verdict without witness".into()),
            },
            _ => Ok(()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("verdict serialization cannot fail")
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Non-finite bounds travel as `null` and read back as `-inf`, the only
/// non-finite value a bound can take (empty region or no incumbent yet).
pub(crate) mod bound_serde {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::Relation;
    use crate::network::{Activation, Layer};
    use rand::SeedableRng;
    use std::collections::BTreeMap;

    fn identity() -> Network {
        Network::new(
            1,
            vec![Layer::new(vec![vec![1.0]], vec![0.0], Activation::Linear)],
            BTreeMap::new(),
        )
        .unwrap()
    }

    fn claim_le(t: f64) -> SafetyClaim {
        SafetyClaim {
            name: "c".into(),
            region: InputRegion::from_box(InputBox::new(vec![-1.0], vec![1.0]).unwrap()),
            objective: vec![1.0],
            threshold: t,
        }
    }

    const NO_LEFT_CUT_IN: &str = r#"{
        "name": "no-left-cut-in",
        "box": {"lo": [0, 1, 0], "hi": [40, 1, 20]},
        "constraints": [],
        "objective": [1.0, 0.0],
        "threshold": 3.0
    }"#;

    #[test]
    fn parses_no_left_cut_in() {
        let c = parse_claim(NO_LEFT_CUT_IN).unwrap();
        assert_eq!(c.name, "no-left-cut-in");
        assert_eq!(c.threshold, 3.0);
        assert_eq!(c.objective, vec![1.0, 0.0]);
        assert_eq!(c.region.input_box.lo[1], 1.0);
        assert_eq!(c.region.input_box.hi[1], 1.0);
    }

    #[test]
    fn objective_length_mismatch() {
        let c = parse_claim(NO_LEFT_CUT_IN).unwrap();
        let net = Network::new(
            3,
            vec![Layer::new(vec![vec![1.0, 0.0, 0.0]], vec![0.0], Activation::Linear)],
            BTreeMap::new(),
        )
        .unwrap();
        let err = c.validate_for(&net).unwrap_err().to_string();
        assert!(err.contains("objective"), "{err}");
    }

    #[test]
    fn empty_constraint_list_is_whole_box() {
        let c = parse_claim(
            r#"{"name": "all", "box": {"lo": [-1], "hi": [1]}, "objective": [1], "threshold": 0}"#,
        )
        .unwrap();
        assert!(c.region.linear_constraints.is_empty());
        assert!(c.region.contains(&[0.9], 0.0));
    }

    #[test]
    fn min_sense_is_negated() {
        let c = parse_claim(
            r#"{"name": "floor", "box": {"lo": [-1], "hi": [1]}, "objective": [2, -1], "threshold": -0.5, "sense": "min"}"#,
        )
        .unwrap();
        assert_eq!(c.objective, vec![-2.0, 1.0]);
        assert_eq!(c.threshold, 0.5);
    }

    #[test]
    fn bad_fields_name_their_path() {
        let err = parse_claim(
            r#"{"name": "x", "box": {"lo": [0, 0], "hi": [1, 1]},
                "constraints": [{"coeffs": [1], "rel": "<=", "rhs": 0}],
                "objective": [1], "threshold": 0}"#,
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("constraints[0].coeffs"), "{err}");
        assert!(parse_claim(r#"{"name": "x"}"#).is_err());
    }

    #[test]
    fn claim_round_trip() {
        let mut c = parse_claim(NO_LEFT_CUT_IN).unwrap();
        c.region
            .linear_constraints
            .push(LinearConstraint::new(vec![1.0, 0.0, -0.5], Relation::Ge, 0.1));
        assert_eq!(parse_claim(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn replay_examples() {
        let net = identity();
        let c = claim_le(0.5);
        assert!(replay_witness(&net, &c, &[1.0]).unwrap());
        assert!(!replay_witness(&net, &c, &[0.4]).unwrap());
        // outside the region
        assert!(!replay_witness(&net, &c, &[1.5]).unwrap());
        assert!(replay_witness(&net, &c, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn verdict_invariants() {
        let net = identity();
        let c = claim_le(0.5);
        let mut v = Verdict {
            status: VerdictStatus::Violated,
            upper_bound: 1.0,
            lower_bound: 1.0,
            witness: Some(vec![1.0]),
            stats: SolverStats::default(),
        };
        v.check_invariants(&net, &c).unwrap();
        v.witness = Some(vec![0.2]);
        assert!(v.check_invariants(&net, &c).is_err());
        v.status = VerdictStatus::Proved;
        assert!(v.check_invariants(&net, &c).is_err());
    }

    #[test]
    fn verdict_document_with_empty_region() {
        let v = Verdict {
            status: VerdictStatus::RegionEmpty,
            upper_bound: f64::NEG_INFINITY,
            lower_bound: f64::NEG_INFINITY,
            witness: None,
            stats: SolverStats {
                nodes: 1,
                lp_solves: 1,
                time_s: 0.5,
            },
        };
        let text = v.to_json();
        assert!(text.contains("\"region_empty\""));
        assert!(text.contains("\"upper_bound\": null"));
        assert_eq!(Verdict::parse(&text).unwrap(), v);
    }

    #[test]
    fn sampling_respects_rows() {
        let region = InputRegion {
            input_box: InputBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap(),
            linear_constraints: vec![LinearConstraint::new(vec![1.0, 1.0], Relation::Le, 1.0)],
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let pts = sample_region(&region, 500, &mut rng);
        assert_eq!(pts.len(), 500);
        assert!(pts.iter().all(|p| region.contains(p, 1e-12)));
    }
}
