//! Page mutations as data, so they can travel over the wire or be logged.

use serde::{Deserialize, Serialize};

use crate::autolabel::{apply_proposals, LabelProposal, Policy};
use crate::boxops::{delete_segments, group_segments, merge_segments, set_label};
use crate::error::{Error, Result};
use crate::model::{LabelSchema, Page};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum PageOp {
    Merge {
        ids: Vec<u64>,
        #[serde(default = "default_joiner")]
        joiner: String,
    },
    Group {
        ids: Vec<u64>,
        label: String,
    },
    Delete {
        ids: Vec<u64>,
    },
    SetLabel {
        ids: Vec<u64>,
        /// `null` clears the label.
        label: Option<String>,
    },
    ApplyProposals {
        proposals: Vec<LabelProposal>,
        #[serde(default)]
        policy: Policy,
    },
}

fn default_joiner() -> String {
    " ".into()
}

impl PageOp {
    /// Returns the edited copy of `page`; on error `page` is untouched.
    pub fn apply(&self, page: &Page, schema: &LabelSchema) -> Result<Page> {
        match self {
            PageOp::Merge { ids, joiner } => merge_segments(page, ids, joiner),
            PageOp::Group { ids, label } => group_segments(page, ids, label, schema),
            PageOp::Delete { ids } => delete_segments(page, ids),
            PageOp::SetLabel { ids, label } => set_label(page, ids, label.as_deref(), schema),
            PageOp::ApplyProposals { proposals, policy } => {
                if let Some(p) = proposals.iter().find(|p| !schema.contains(&p.label)) {
                    return Err(Error::UnknownLabel(p.label.clone()));
                }
                apply_proposals(page, proposals, *policy)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn wire_shape() {
        let op: PageOp = serde_json::from_value(json!({"op": "merge", "ids": [1, 2]})).unwrap();
        assert_eq!(
            op,
            PageOp::Merge {
                ids: vec![1, 2],
                joiner: " ".into()
            }
        );
        let op: PageOp = serde_json::from_value(json!({"op": "set_label", "ids": [3], "label": null})).unwrap();
        assert_eq!(
            op,
            PageOp::SetLabel {
                ids: vec![3],
                label: None
            }
        );
        let op: PageOp = serde_json::from_value(json!({
            "op": "apply_proposals",
            "proposals": [{"segment_id": 1, "label": "Title", "confidence": 0.5}],
            "policy": "OVERWRITE_AUTO"
        }))
        .unwrap();
        assert!(matches!(
            op,
            PageOp::ApplyProposals {
                policy: Policy::OverwriteAuto,
                ..
            }
        ));
    }
}
