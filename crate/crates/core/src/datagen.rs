// SPDX-License-Identifier: Apache-2.0

//! Synthetic skewed datasets and CSV input/output.

use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, Entity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// Entity `i` goes to partition `i mod m`.
    #[default]
    RoundRobin,
    /// Entities sorted by key and cut into `m` contiguous chunks, so blocks
    /// pile up in few partitions.
    Clustered,
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layout::RoundRobin => "round-robin",
            Layout::Clustered => "clustered",
        })
    }
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "round-robin" => Ok(Layout::RoundRobin),
            "clustered" => Ok(Layout::Clustered),
            other => Err(Error::InvalidArgument(format!("unknown layout {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub n: usize,
    pub distinct_keys: usize,
    pub zipf_s: f64,
    pub m: usize,
    pub seed: u64,
    pub attr_len: usize,
    #[serde(default)]
    pub layout: Layout,
}

impl GenSpec {
    pub fn validate(&self) -> Result<()> {
        if self.distinct_keys == 0 || self.m == 0 {
            return Err(Error::InvalidArgument(
                "distinct_keys and m must be at least 1".into(),
            ));
        }
        if !(self.zipf_s >= 0.0 && self.zipf_s.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "zipf exponent must be finite and >= 0, got {}",
                self.zipf_s
            )));
        }
        Ok(())
    }
}

/// Inverse-CDF sampler over ranks `1..=k` with weight `rank^-s`.
#[derive(Debug, Clone)]
pub struct Zipf {
    cumulative: Vec<f64>,
}

impl Zipf {
    pub fn new(k: usize, s: f64) -> Self {
        let mut total = 0.0;
        let cumulative = (1..=k)
            .map(|rank| {
                total += (rank as f64).powf(-s);
                total
            })
            .collect();
        Self { cumulative }
    }

    /// Zero-based rank.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("k >= 1");
        let u = rng.gen::<f64>() * total;
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1)
    }
}

fn key_name(rank: usize, distinct_keys: usize) -> String {
    let width = distinct_keys.to_string().len();
    format!("k{rank:0width$}")
}

const ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyz";

/// Entities of a block share a base name, each character of which is
/// replaced with probability 0.1, so a trigram matcher finds real matches.
fn noisy_name<R: Rng>(base: &[u8], rng: &mut R) -> String {
    base.iter()
        .map(|&c| {
            if rng.gen_bool(0.1) {
                ALPHABET[rng.gen_range(0..ALPHABET.len())] as char
            } else {
                c as char
            }
        })
        .collect()
}

pub fn generate(spec: &GenSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let zipf = Zipf::new(spec.distinct_keys, spec.zipf_s);
    let bases: Vec<Vec<u8>> = (0..spec.distinct_keys)
        .map(|_| {
            (0..spec.attr_len)
                .map(|_| ALPHABET[rng.gen_range(0..ALPHABET.len())])
                .collect()
        })
        .collect();
    let mut entities: Vec<Entity> = (0..spec.n)
        .map(|id| {
            let rank = zipf.sample(&mut rng);
            let name = noisy_name(&bases[rank], &mut rng);
            Entity::new(id as u64, 0, key_name(rank, spec.distinct_keys), vec![name])
        })
        .collect();
    match spec.layout {
        Layout::RoundRobin => Dataset::round_robin(entities, spec.m),
        Layout::Clustered => {
            entities.sort_by(|a, b| (&a.key, a.id).cmp(&(&b.key, b.id)));
            let chunk = spec.n.div_ceil(spec.m).max(1);
            let mut partitions = vec![Vec::new(); spec.m];
            for (i, mut e) in entities.into_iter().enumerate() {
                e.partition = i / chunk;
                partitions[i / chunk].push(e);
            }
            Dataset::new(partitions)
        }
    }
}

/// Header of generated CSV files.
pub const GENERATED_HEADER: [&str; 2] = ["key", "name"];

/// Writes entities in id order with the generated header. Loading the file
/// round-robin gives ids back in the same order.
pub fn write_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    write_csv_to(dataset, File::create(path)?)
}

/// Same as [`write_csv`] for any writer.
pub fn write_csv_to<W: Write>(dataset: &Dataset, out: W) -> Result<()> {
    let mut entities: Vec<&Entity> = dataset.entities().collect();
    entities.sort_by_key(|e| e.id);
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(GENERATED_HEADER).map_err(csv_io)?;
    for e in entities {
        let mut row = vec![e.key.as_str()];
        row.extend(e.attrs.iter().map(String::as_str));
        writer.write_record(&row).map_err(csv_io)?;
    }
    writer.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Reads a headered CSV file. Ids are assigned in file order, the key comes
/// from `key_column`, the other columns become attributes, and rows are
/// dealt round-robin into `m` partitions.
pub fn load_csv(path: &Path, key_column: &str, m: usize) -> Result<Dataset> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| malformed(path, &e, 1))?;
    let headers = reader.headers().map_err(|e| malformed(path, &e, 1))?.clone();
    let key_index = headers
        .iter()
        .position(|h| h == key_column)
        .ok_or_else(|| Error::MissingColumn {
            path: path.to_path_buf(),
            column: key_column.to_string(),
        })?;
    let mut entities = Vec::new();
    for (id, row) in reader.records().enumerate() {
        let row = row.map_err(|e| malformed(path, &e, id as u64 + 2))?;
        let attrs = row
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != key_index)
            .map(|(_, v)| v.to_string())
            .collect();
        entities.push(Entity::new(id as u64, 0, &row[key_index], attrs));
    }
    Dataset::round_robin(entities, m)
}

fn malformed(path: &Path, e: &csv::Error, fallback_line: u64) -> Error {
    if let csv::ErrorKind::Io(io) = e.kind() {
        return Error::Io(std::io::Error::new(io.kind(), io.to_string()));
    }
    Error::MalformedRow {
        path: path.to_path_buf(),
        line: e.position().map_or(fallback_line, |p| p.line()),
        reason: e.to_string(),
    }
}
