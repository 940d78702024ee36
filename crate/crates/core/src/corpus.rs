//! House corpus files: JSON lines, a header record followed by one house per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::{generate_house, GeneratorConfig, HouseContext};

pub const CORPUS_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }

    fn stream(&self) -> u64 {
        *self as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusHeader {
    pub version: u32,
    pub split: Split,
    pub seed: u64,
    pub houses: usize,
    pub generator: GeneratorConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub header: CorpusHeader,
    pub houses: Vec<HouseContext>,
}

impl Corpus {
    /// Generate `count` houses for `split`. House `i` of a split depends only
    /// on `(seed, split, i)`.
    pub fn generate(generator: &GeneratorConfig, split: Split, count: usize, seed: u64) -> Result<Self> {
        generator.validate()?;
        let split_seed = crate::derive_seed(seed, split.stream());
        let houses = (0..count)
            .map(|i| generate_house(generator, crate::derive_seed(split_seed, i as u64)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Corpus {
            header: CorpusHeader {
                version: CORPUS_FORMAT_VERSION,
                split,
                seed,
                houses: count,
                generator: generator.clone(),
            },
            houses,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut line = |value: String| writeln!(w, "{value}").map_err(|e| Error::io(path, e));
        line(serde_json::to_string(&self.header)?)?;
        for h in &self.houses {
            line(serde_json::to_string(h)?)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header_line = lines
            .next()
            .ok_or_else(|| Error::InvalidHouse(format!("{}: empty corpus file", path.display())))?
            .map_err(|e| Error::io(path, e))?;
        let header: CorpusHeader = serde_json::from_str(&header_line)?;
        if header.version != CORPUS_FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(header.version));
        }
        let mut houses = Vec::with_capacity(header.houses);
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let house: HouseContext = serde_json::from_str(&line)
                .map_err(|e| Error::InvalidHouse(format!("{} line {}: {e}", path.display(), i + 2)))?;
            houses.push(house);
        }
        if houses.len() != header.houses {
            return Err(Error::InvalidHouse(format!(
                "{}: header declares {} houses, file has {}",
                path.display(),
                header.houses,
                houses.len()
            )));
        }
        Ok(Corpus { header, houses })
    }
}
