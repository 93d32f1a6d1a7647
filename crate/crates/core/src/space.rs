//! Named vector spaces and the plain-text embedding file format.
//!
//! The text layout is the classic word2vec one: a header line
//! `<count> <dimension>` followed by one `<identifier> <v1> ... <vd>` line per
//! vector. Identifiers never contain spaces; internal spaces are written as `_`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether a space can be compared directly with the other platform's space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alignment {
    /// Built over a basis shared by both platforms (joint vocabulary, shared
    /// word vectors, or already translated into the destination space).
    Shared,
    /// Trained on one platform only; needs a translation first.
    PlatformLocal,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub kind: String,
    pub params: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new(kind: impl Into<String>) -> Self {
        Provenance {
            kind: kind.into(),
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSpace {
    pub name: String,
    dimension: usize,
    vectors: BTreeMap<String, Vec<f64>>,
    pub provenance: Provenance,
    pub alignment: Alignment,
}

impl EmbeddingSpace {
    pub fn new(name: impl Into<String>, dimension: usize, alignment: Alignment, provenance: Provenance) -> Self {
        EmbeddingSpace {
            name: name.into(),
            dimension,
            vectors: BTreeMap::new(),
            provenance,
            alignment,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Adds or replaces a vector. Rejects wrong lengths and non-finite values.
    pub fn insert(&mut self, id: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        let id = id.into();
        if vector.len() != self.dimension {
            return Err(Error::Dimension {
                expected: self.dimension,
                found: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite component in vector for `{id}` of space `{}`",
                self.name
            )));
        }
        self.vectors.insert(id, vector);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.vectors.get(id).map(Vec::as_slice)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.vectors.contains_key(id)
    }

    /// Vectors in identifier order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.vectors.keys().map(String::as_str)
    }

    /// Applies `f` to every vector, producing a space of dimension `dimension`.
    pub fn map_vectors<F>(&self, name: &str, dimension: usize, mut f: F) -> Result<EmbeddingSpace>
    where
        F: FnMut(&str, &[f64]) -> Vec<f64>,
    {
        let mut out = EmbeddingSpace::new(name, dimension, self.alignment, self.provenance.clone());
        for (id, v) in self.iter() {
            out.insert(id, f(id, v))?;
        }
        Ok(out)
    }

    /// Copy with every nonzero vector scaled to unit length.
    pub fn normalized(&self) -> EmbeddingSpace {
        let mut out = self.clone();
        for v in out.vectors.values_mut() {
            let n = norm(v);
            if n > 0.0 {
                v.iter_mut().for_each(|x| *x /= n);
            }
        }
        out
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.vectors.len(), self.dimension)?;
        for (id, v) in &self.vectors {
            write!(w, "{}", escape_identifier(id))?;
            for x in v {
                write!(w, " {x}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_text(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Parses the text format. The result is marked [`Alignment::Shared`] with
    /// provenance kind `file`; callers that know better overwrite both.
    pub fn read_text<R: BufRead>(reader: R, name: &str) -> Result<EmbeddingSpace> {
        let mut lines = reader.lines();
        let header = match lines.next() {
            Some(line) => line?,
            None => {
                return Err(Error::Format {
                    line: 1,
                    message: "empty file, expected `<count> <dimension>` header".into(),
                })
            }
        };
        let fields: Vec<&str> = header.split_whitespace().collect();
        let parse_header = |s: &str| {
            s.parse::<usize>().map_err(|_| Error::Format {
                line: 1,
                message: format!("invalid header `{header}`"),
            })
        };
        if fields.len() != 2 {
            return Err(Error::Format {
                line: 1,
                message: format!("invalid header `{header}`"),
            });
        }
        let count = parse_header(fields[0])?;
        let dimension = parse_header(fields[1])?;
        let mut space = EmbeddingSpace::new(name, dimension, Alignment::Shared, Provenance::new("file"));
        let mut rows = 0usize;
        for (i, line) in lines.enumerate() {
            let line = line?;
            let lineno = i as u64 + 2;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let id = parts.next().unwrap_or_default().to_string();
            let values = parts
                .map(|p| p.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Format {
                    line: lineno,
                    message: format!("bad component for `{id}`: {e}"),
                })?;
            if values.len() != dimension {
                return Err(Error::Format {
                    line: lineno,
                    message: format!("`{id}` has {} components, header declares {dimension}", values.len()),
                });
            }
            if space.contains(&id) {
                return Err(Error::Format {
                    line: lineno,
                    message: format!("duplicate identifier `{id}`"),
                });
            }
            space.insert(id, values).map_err(|e| Error::Format {
                line: lineno,
                message: e.to_string(),
            })?;
            rows += 1;
        }
        if rows != count {
            return Err(Error::Format {
                line: rows as u64 + 1,
                message: format!("header declares {count} vectors, found {rows}"),
            });
        }
        Ok(space)
    }

    pub fn load(path: &Path) -> Result<EmbeddingSpace> {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        EmbeddingSpace::read_text(BufReader::new(File::open(path)?), &name)
    }
}

pub fn escape_identifier(id: &str) -> String {
    id.replace(char::is_whitespace, "_")
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity, or `None` when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}
