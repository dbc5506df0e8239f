//! Split sidecar: one `user\tvalid_item\ttest_item` line per split user,
//! raw ids.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rankdistill_core::dataset::SplitAssignment;
use rankdistill_core::InteractionDataset;

use crate::error::{CliResult, DataContext, Failure};

const HEADER: &str = "# user\tvalid_item\ttest_item";

pub fn write_sidecar(dataset: &InteractionDataset, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{HEADER}")?;
    let (users, items) = (dataset.user_ids(), dataset.item_ids());
    for a in dataset.split_assignments() {
        writeln!(
            out,
            "{}\t{}\t{}",
            users.raw(a.user).unwrap_or_default(),
            items.raw(a.valid).unwrap_or_default(),
            items.raw(a.test).unwrap_or_default()
        )?;
    }
    Ok(())
}

pub fn read_sidecar(dataset: &InteractionDataset, source: impl Read) -> CliResult<Vec<SplitAssignment>> {
    let mut out = Vec::new();
    for (n, line) in BufReader::new(source).lines().enumerate() {
        let line = line.data_ctx("reading split sidecar")?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [user, valid, test] = fields[..] else {
            return Err(Failure::data(format!("split line {}: expected 3 tab-separated fields", n + 1)));
        };
        let lookup = |map: &rankdistill_core::IdMap, raw: &str, what: &str| {
            map.index_of(raw).ok_or_else(|| Failure::data(format!("split line {}: unknown {what} `{raw}`", n + 1)))
        };
        out.push(SplitAssignment {
            user: lookup(dataset.user_ids(), user, "user")?,
            valid: lookup(dataset.item_ids(), valid, "item")?,
            test: lookup(dataset.item_ids(), test, "item")?,
        });
    }
    Ok(out)
}

/// Applies the sidecar at `path` to `dataset`.
pub fn apply_sidecar(dataset: &InteractionDataset, path: &Path) -> CliResult<InteractionDataset> {
    let file = std::fs::File::open(path).data_ctx(format!("opening split {}", path.display()))?;
    let assignments = read_sidecar(dataset, file).map_err(|e| e.context(format!("in {}", path.display())))?;
    dataset.with_split(&assignments).map_err(|e| Failure::from(e).context(format!("applying {}", path.display())))
}
