//! JSON documents for behaviours and hidden-variable models.
//!
//! Tables are nested arrays indexed `[x][y][a][b]`, outcome index 0 meaning
//! `+1`. Model conditionals are indexed `[λ][x][y]`.

use serde::{Deserialize, Serialize};

use crate::behaviour::{Behaviour, SettingsDistribution, Tolerance};
use crate::error::{BellError, Result};
use crate::hvmodel::{HvModel, LocalResponse};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviourDoc {
    pub num_settings_a: usize,
    pub num_settings_b: usize,
    pub probabilities: Vec<Vec<[[f64; 2]; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settings_distribution: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalResponseDoc {
    pub alice_plus: Vec<f64>,
    pub bob_plus: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    pub num_settings_a: usize,
    pub num_settings_b: usize,
    pub lambda_count: usize,
    pub p_lambda: Vec<f64>,
    pub p_lambda_given_xy: Vec<Vec<Vec<f64>>>,
    pub p_xy_given_lambda: Vec<Vec<Vec<f64>>>,
    pub outcome_tables: Vec<Vec<Vec<[[f64; 2]; 2]>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factorized: Option<Vec<LocalResponseDoc>>,
}

fn check_grid<T>(rows: &[Vec<T>], ma: usize, mb: usize, what: &str) -> Result<()> {
    if rows.len() != ma || rows.iter().any(|r| r.len() != mb) {
        return Err(BellError::Structural(format!("{what} must be a {ma}x{mb} array")));
    }
    Ok(())
}

fn flatten_table(rows: &[Vec<[[f64; 2]; 2]>]) -> Vec<f64> {
    rows.iter()
        .flat_map(|r| r.iter().flat_map(|t| [t[0][0], t[0][1], t[1][0], t[1][1]]))
        .collect()
}

impl BehaviourDoc {
    pub fn new(b: &Behaviour, s: Option<&SettingsDistribution>) -> Self {
        BehaviourDoc {
            num_settings_a: b.num_settings_a(),
            num_settings_b: b.num_settings_b(),
            probabilities: b.to_nested(),
            settings_distribution: s.map(SettingsDistribution::to_nested),
        }
    }

    /// Behaviour with entries clamped into `[0, 1]` when within `tol`. The
    /// result is not validated beyond that.
    pub fn behaviour(&self, tol: Tolerance) -> Result<Behaviour> {
        let (ma, mb) = (self.num_settings_a, self.num_settings_b);
        check_grid(&self.probabilities, ma, mb, "probabilities")?;
        Behaviour::new_clamped(ma, mb, flatten_table(&self.probabilities), tol)
    }

    pub fn settings(&self, tol: Tolerance) -> Result<Option<SettingsDistribution>> {
        let Some(rows) = &self.settings_distribution else {
            return Ok(None);
        };
        let (ma, mb) = (self.num_settings_a, self.num_settings_b);
        check_grid(rows, ma, mb, "settings_distribution")?;
        SettingsDistribution::new(ma, mb, rows.concat(), tol).map(Some)
    }
}

impl ModelDoc {
    pub fn new(m: &HvModel) -> Self {
        let (ma, mb) = (m.num_settings_a(), m.num_settings_b());
        let k = m.lambda_count();
        let grid = |f: &dyn Fn(usize, usize) -> f64| -> Vec<Vec<f64>> {
            (0..ma).map(|x| (0..mb).map(|y| f(x, y)).collect()).collect()
        };
        ModelDoc {
            num_settings_a: ma,
            num_settings_b: mb,
            lambda_count: k,
            p_lambda: m.p_lambda().to_vec(),
            p_lambda_given_xy: (0..k)
                .map(|l| grid(&|x, y| m.p_lambda_given_xy(l, x, y)))
                .collect(),
            p_xy_given_lambda: (0..k)
                .map(|l| grid(&|x, y| m.p_xy_given_lambda(l)[x * mb + y]))
                .collect(),
            outcome_tables: m.outcome_tables().iter().map(Behaviour::to_nested).collect(),
            factorized: m.factorized().map(|f| {
                f.iter()
                    .map(|r| LocalResponseDoc {
                        alice_plus: r.alice_plus.clone(),
                        bob_plus: r.bob_plus.clone(),
                    })
                    .collect()
            }),
        }
    }

    pub fn model(&self, tol: Tolerance) -> Result<HvModel> {
        let (ma, mb, k) = (self.num_settings_a, self.num_settings_b, self.lambda_count);
        if self.p_lambda.len() != k
            || self.p_lambda_given_xy.len() != k
            || self.p_xy_given_lambda.len() != k
            || self.outcome_tables.len() != k
        {
            return Err(BellError::Structural(format!(
                "every per-λ array must have lambda_count = {k} entries"
            )));
        }
        for l in 0..k {
            check_grid(&self.p_lambda_given_xy[l], ma, mb, "p_lambda_given_xy entry")?;
            check_grid(&self.p_xy_given_lambda[l], ma, mb, "p_xy_given_lambda entry")?;
            check_grid(&self.outcome_tables[l], ma, mb, "outcome_tables entry")?;
        }
        let outcomes = self
            .outcome_tables
            .iter()
            .map(|t| Behaviour::new_clamped(ma, mb, flatten_table(t), tol))
            .collect::<Result<Vec<_>>>()?;
        let factorized = self.factorized.as_ref().map(|f| {
            f.iter()
                .map(|r| LocalResponse {
                    alice_plus: r.alice_plus.clone(),
                    bob_plus: r.bob_plus.clone(),
                })
                .collect()
        });
        HvModel::new(
            ma,
            mb,
            self.p_lambda.clone(),
            self.p_lambda_given_xy.iter().flat_map(|g| g.concat()).collect(),
            self.p_xy_given_lambda.iter().flat_map(|g| g.concat()).collect(),
            outcomes,
            factorized,
            tol,
        )
    }
}

pub fn behaviour_to_json(b: &Behaviour, s: Option<&SettingsDistribution>) -> String {
    serde_json::to_string_pretty(&BehaviourDoc::new(b, s)).expect("plain data serializes")
}

/// Parses a behaviour document; structural problems are errors, probabilistic
/// validity is left to the caller.
pub fn behaviour_from_json(text: &str, tol: Tolerance) -> Result<(Behaviour, Option<SettingsDistribution>)> {
    let doc: BehaviourDoc = serde_json::from_str(text)?;
    Ok((doc.behaviour(tol)?, doc.settings(tol)?))
}

pub fn model_to_json(m: &HvModel) -> String {
    serde_json::to_string_pretty(&ModelDoc::new(m)).expect("plain data serializes")
}

pub fn model_from_json(text: &str, tol: Tolerance) -> Result<HvModel> {
    let doc: ModelDoc = serde_json::from_str(text)?;
    doc.model(tol)
}
