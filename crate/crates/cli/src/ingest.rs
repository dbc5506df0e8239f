//! Delimited interaction logs.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use rankdistill_core::{DatasetBuilder, InteractionDataset};
use serde::Serialize;

use crate::error::{CliResult, DataContext, Failure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Delimiter {
    /// Tab if the first data line contains one, otherwise comma.
    #[default]
    Auto,
    Comma,
    Tab,
}

impl Delimiter {
    fn resolve(self, text: &str) -> u8 {
        match self {
            Delimiter::Comma => b',',
            Delimiter::Tab => b'\t',
            Delimiter::Auto => {
                let first = text.lines().map(str::trim).find(|l| !l.is_empty() && !l.starts_with('#'));
                if first.is_some_and(|l| l.contains('\t')) {
                    b'\t'
                } else {
                    b','
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IngestStats {
    pub records: usize,
    pub duplicates: usize,
    pub users: usize,
    pub items: usize,
    pub interactions: usize,
    /// Interactions removed by the minimum-count filter.
    pub filtered_out: usize,
}

/// Reads `(user, item[, ignored...])` records. Lines starting with `#` and
/// blank lines are skipped; duplicates are dropped.
pub fn load_interactions(mut source: impl Read, delimiter: Delimiter) -> CliResult<(InteractionDataset, IngestStats)> {
    let mut text = String::new();
    source.read_to_string(&mut text).data_ctx("reading interactions (input must be UTF-8)")?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter.resolve(&text))
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut builder = DatasetBuilder::new();
    for record in reader.records() {
        let record = record.data_ctx("malformed interaction record")?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let (user, item) = match (record.get(0), record.get(1)) {
            (Some(u), Some(i)) if !u.is_empty() && !i.is_empty() => (u, i),
            _ => {
                return Err(Failure::data(format!(
                    "line {line}: expected `user<delim>item`, got {:?}",
                    record.as_slice()
                )))
            }
        };
        builder.push(user, item);
    }
    let (records, duplicates) = (builder.records(), builder.duplicates());
    let dataset = builder.build()?;
    let stats = IngestStats {
        records,
        duplicates,
        users: dataset.num_users(),
        items: dataset.num_items(),
        interactions: dataset.num_interactions(),
        filtered_out: 0,
    };
    Ok((dataset, stats))
}

pub fn load_path(path: &Path, delimiter: Delimiter) -> CliResult<(InteractionDataset, IngestStats)> {
    let file = File::open(path).data_ctx(format!("opening {}", path.display()))?;
    load_interactions(BufReader::new(file), delimiter).map_err(|e| e.context(format!("in {}", path.display())))
}

/// Writes every interaction as `user\titem`, users in index order and each
/// user's items ascending by index. Held-out items are included.
pub fn write_interactions(dataset: &InteractionDataset, mut out: impl Write) -> std::io::Result<()> {
    let users = dataset.user_ids();
    let items = dataset.item_ids();
    for u in 0..dataset.num_users() {
        for i in dataset.all_items(u) {
            writeln!(out, "{}\t{}", users.raw(u).unwrap_or_default(), items.raw(i).unwrap_or_default())?;
        }
    }
    Ok(())
}
