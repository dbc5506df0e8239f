//! Versioned JSON checkpoints.

use std::path::Path;

use rankdistill_core::{AdamState, InteractionDataset, ModelParams};
use serde::{Deserialize, Serialize};

use crate::error::{CliResult, DataContext, Failure};

pub const FORMAT: &str = "rankdistill-checkpoint/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    /// `teacher` or the distillation method that produced the model.
    pub role: String,
    pub seed: u64,
    pub dataset_fingerprint: String,
    /// Model kind, dimensions and every tensor, row-major.
    pub params: ModelParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adam: Option<AdamState>,
}

impl Checkpoint {
    pub fn new(
        role: &str,
        seed: u64,
        dataset_fingerprint: String,
        params: ModelParams,
        adam: Option<AdamState>,
    ) -> Self {
        Self { format: FORMAT.into(), role: role.into(), seed, dataset_fingerprint, params, adam }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("checkpoint serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        let ck: Checkpoint = serde_json::from_str(text).data_ctx("parsing checkpoint")?;
        if ck.format != FORMAT {
            return Err(Failure::data(format!("unsupported checkpoint format `{}` (expected `{FORMAT}`)", ck.format)));
        }
        ck.params.validate()?;
        Ok(ck)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).data_ctx(format!("reading checkpoint {}", path.display()))?;
        Self::from_json(&text).map_err(|e| e.context(format!("in {}", path.display())))
    }

    /// Rejects checkpoints whose shape or source data differ from `dataset`.
    pub fn check_against(&self, dataset: &InteractionDataset, fingerprint: &str) -> CliResult<()> {
        self.params.check_dims(dataset.num_users(), dataset.num_items()).map_err(|e| Failure::Data(e.into()))?;
        if self.dataset_fingerprint != fingerprint {
            return Err(Failure::data(format!(
                "checkpoint was trained on dataset {} but the input is {fingerprint}",
                self.dataset_fingerprint
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rankdistill_core::models::{init_params, InitConfig};
    use rankdistill_core::rng::{fork, Stream};
    use rankdistill_core::ModelKind;

    fn sample() -> Checkpoint {
        let params =
            init_params(ModelKind::NeuMf, 3, 4, 2, &InitConfig::default(), &mut fork(1, Stream::Init)).unwrap();
        Checkpoint::new("teacher", 1, "abc".into(), params, None)
    }

    #[test]
    fn json_round_trip_is_exact() {
        let ck = sample();
        let back = Checkpoint::from_json(&ck.to_json()).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_json(), ck.to_json());
    }

    #[test]
    fn rejects_other_formats_and_shapes() {
        let mut ck = sample();
        ck.format = "other/v9".into();
        assert!(Checkpoint::from_json(&ck.to_json()).is_err());

        let data = InteractionDataset::from_index_pairs(3, 5, &[(0, 0), (1, 1), (2, 2)]).unwrap();
        let err = sample().check_against(&data, "abc").unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
