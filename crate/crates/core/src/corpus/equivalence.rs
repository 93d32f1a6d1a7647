use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reserved destination (or source) literal marking an untranslatable skill.
pub const NONE_LITERAL: &str = "NONE";

/// A destination for a source skill: a real skill or the "None" skill.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Skill(String),
    None,
}

impl Target {
    pub fn as_skill(&self) -> Option<&str> {
        match self {
            Target::Skill(s) => Some(s),
            Target::None => None,
        }
    }
}

impl std::fmt::Display for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Target::Skill(s) => f.write_str(s),
            Target::None => f.write_str(NONE_LITERAL),
        }
    }
}

/// One labeled ground-truth row.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Link {
    pub src: String,
    pub dst: Target,
}

impl Link {
    pub fn pair(src: &str, dst: &str) -> Link {
        Link {
            src: src.to_string(),
            dst: Target::Skill(dst.to_string()),
        }
    }

    pub fn none(src: &str) -> Link {
        Link {
            src: src.to_string(),
            dst: Target::None,
        }
    }
}

/// Ground-truth skill equivalences between a source and a destination
/// platform. One-to-many is allowed; a skill marked untranslatable on one
/// side never also appears in a pair on that side.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EquivalenceSet {
    pub pairs: BTreeSet<(String, String)>,
    pub none_src: BTreeSet<String>,
    pub none_dst: BTreeSet<String>,
}

impl EquivalenceSet {
    pub fn insert_pair(&mut self, src: &str, dst: &str) -> Result<()> {
        if self.none_src.contains(src) {
            return Err(Error::Data(format!(
                "source skill `{src}` is marked NONE and cannot also be paired"
            )));
        }
        if self.none_dst.contains(dst) {
            return Err(Error::Data(format!(
                "destination skill `{dst}` is marked NONE and cannot also be paired"
            )));
        }
        self.pairs.insert((src.to_string(), dst.to_string()));
        Ok(())
    }

    pub fn mark_none_src(&mut self, src: &str) -> Result<()> {
        if self.pairs.iter().any(|(s, _)| s == src) {
            return Err(Error::Data(format!(
                "source skill `{src}` is paired and cannot be marked NONE"
            )));
        }
        self.none_src.insert(src.to_string());
        Ok(())
    }

    pub fn mark_none_dst(&mut self, dst: &str) -> Result<()> {
        if self.pairs.iter().any(|(_, d)| d == dst) {
            return Err(Error::Data(format!(
                "destination skill `{dst}` is paired and cannot be marked NONE"
            )));
        }
        self.none_dst.insert(dst.to_string());
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty() && self.none_src.is_empty()
    }

    /// The same relation seen from the destination side.
    pub fn reversed(&self) -> EquivalenceSet {
        EquivalenceSet {
            pairs: self.pairs.iter().map(|(s, d)| (d.clone(), s.clone())).collect(),
            none_src: self.none_dst.clone(),
            none_dst: self.none_src.clone(),
        }
    }

    /// Rows for evaluation: every pair, then every untranslatable source.
    pub fn links(&self) -> Vec<Link> {
        self.pairs
            .iter()
            .map(|(s, d)| Link::pair(s, d))
            .chain(self.none_src.iter().map(|s| Link::none(s)))
            .collect()
    }

    pub fn from_links(links: &[Link]) -> Result<EquivalenceSet> {
        let mut set = EquivalenceSet::default();
        for link in links {
            match &link.dst {
                Target::Skill(d) => set.insert_pair(&link.src, d)?,
                Target::None => set.mark_none_src(&link.src)?,
            }
        }
        Ok(set)
    }

    /// Destination partners of every source skill.
    pub fn partners(&self) -> BTreeMap<&str, BTreeSet<&str>> {
        let mut out: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for (s, d) in &self.pairs {
            out.entry(s.as_str()).or_default().insert(d.as_str());
        }
        out
    }

    /// Reads `src_skill,dst_skill` rows. `NONE` in the destination column marks
    /// an untranslatable source skill, `NONE` in the source column an
    /// untranslatable destination skill. A `src_skill,dst_skill` header row is
    /// optional.
    pub fn read_delimited<R: Read>(reader: R, delimiter: u8) -> Result<EquivalenceSet> {
        let mut rdr = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut set = EquivalenceSet::default();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let line = record.position().map(|p| p.line()).unwrap_or(i as u64 + 1);
            if record.len() != 2 {
                return Err(Error::Parse {
                    line,
                    message: format!("expected 2 columns, found {}", record.len()),
                });
            }
            let (src, dst) = (&record[0], &record[1]);
            if i == 0 && src == "src_skill" && dst == "dst_skill" {
                continue;
            }
            if src.is_empty() || dst.is_empty() {
                return Err(Error::Parse {
                    line,
                    message: "empty skill identifier".into(),
                });
            }
            let res = match (src == NONE_LITERAL, dst == NONE_LITERAL) {
                (true, true) => Err(Error::Data("NONE on both sides".into())),
                (false, true) => set.mark_none_src(src),
                (true, false) => set.mark_none_dst(dst),
                (false, false) => set.insert_pair(src, dst),
            };
            res.map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
        }
        Ok(set)
    }

    pub fn load(path: &Path, delimiter: u8) -> Result<EquivalenceSet> {
        EquivalenceSet::read_delimited(File::open(path)?, delimiter)
    }

    pub fn write_delimited<W: Write>(&self, writer: W, delimiter: u8) -> Result<()> {
        let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(writer);
        w.write_record(["src_skill", "dst_skill"])?;
        for (s, d) in &self.pairs {
            w.write_record([s, d])?;
        }
        for s in &self.none_src {
            w.write_record([s.as_str(), NONE_LITERAL])?;
        }
        for d in &self.none_dst {
            w.write_record([NONE_LITERAL, d.as_str()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path, delimiter: u8) -> Result<()> {
        self.write_delimited(File::create(path)?, delimiter)
    }
}
