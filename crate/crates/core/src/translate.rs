//! Linear maps between embedding spaces and cosine ranking.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{EquivalenceSet, Target};
use crate::error::{Error, Result};
use crate::space::{cosine, escape_identifier, norm, Alignment, EmbeddingSpace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TranslationOptions {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub validation_fraction: f64,
    pub init_range: f64,
    pub seed: u64,
}

impl Default for TranslationOptions {
    fn default() -> Self {
        TranslationOptions {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_epochs: 1000,
            patience: 100,
            validation_fraction: 0.2,
            init_range: 0.01,
            seed: 0,
        }
    }
}

impl TranslationOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.max_epochs > 0
            && self.validation_fraction > 0.0
            && self.validation_fraction < 1.0
            && self.init_range > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid translation options: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub initial_validation_loss: f64,
    pub best_validation_loss: f64,
    pub training_pairs: usize,
    pub validation_pairs: usize,
}

/// Maps source vectors (dimension n) to destination vectors (dimension m).
#[derive(Debug, Clone, PartialEq)]
pub struct TranslationMatrix {
    pub matrix: DMatrix<f64>,
    pub source_space_name: String,
    pub destination_space_name: String,
    pub training_meta: TrainingMeta,
}

impl TranslationMatrix {
    pub fn identity(space: &EmbeddingSpace) -> TranslationMatrix {
        let n = space.dimension();
        TranslationMatrix {
            matrix: DMatrix::identity(n, n),
            source_space_name: space.name.clone(),
            destination_space_name: space.name.clone(),
            training_meta: TrainingMeta::default(),
        }
    }

    /// `m n` header then `m` rows of `n` values.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.matrix.nrows(), self.matrix.ncols())?;
        for row in self.matrix.row_iter() {
            let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{}", cells.join(" "))?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_text(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_text<R: BufRead>(reader: R, source: &str, destination: &str) -> Result<TranslationMatrix> {
        let mut lines = reader.lines();
        let header = lines.next().transpose()?.ok_or_else(|| Error::Format {
            line: 1,
            message: "empty file, expected `<m> <n>` header".into(),
        })?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Format {
                line: 1,
                message: format!("invalid header `{header}`"),
            })?;
        let [m, n] = dims[..] else {
            return Err(Error::Format {
                line: 1,
                message: format!("invalid header `{header}`"),
            });
        };
        let mut values = Vec::with_capacity(m * n);
        let mut rows = 0;
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let lineno = i as u64 + 2;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format {
                    line: lineno,
                    message: format!("bad value: {e}"),
                })?;
            if row.len() != n || row.iter().any(|x| !x.is_finite()) {
                return Err(Error::Format {
                    line: lineno,
                    message: format!("expected {n} finite values, found {}", row.len()),
                });
            }
            values.extend(row);
            rows += 1;
        }
        if rows != m {
            return Err(Error::Format {
                line: rows as u64 + 1,
                message: format!("header declares {m} rows, found {rows}"),
            });
        }
        Ok(TranslationMatrix {
            matrix: DMatrix::from_row_slice(m, n, &values),
            source_space_name: source.to_string(),
            destination_space_name: destination.to_string(),
            training_meta: TrainingMeta::default(),
        })
    }

    pub fn load(path: &Path, source: &str, destination: &str) -> Result<TranslationMatrix> {
        TranslationMatrix::read_text(BufReader::new(File::open(path)?), source, destination)
    }
}

/// Mean `1 − cos(Tx, y)` over columns, and its gradient with respect to `T`.
/// `y` columns are unit length. Columns whose image is zero contribute a
/// cosine of 0 and no gradient.
fn cosine_loss(
    t: &DMatrix<f64>,
    x: &DMatrix<f64>,
    y_unit: &DMatrix<f64>,
    with_grad: bool,
) -> (f64, Option<DMatrix<f64>>) {
    let z = t * x;
    let p = x.ncols() as f64;
    let mut loss = 0.0;
    let mut g = DMatrix::zeros(z.nrows(), z.ncols());
    for j in 0..z.ncols() {
        let zj = z.column(j);
        let zn = zj.norm();
        let c = if zn > 0.0 { zj.dot(&y_unit.column(j)) / zn } else { 0.0 };
        loss += 1.0 - c;
        if with_grad && zn > 0.0 {
            let dc = (y_unit.column(j) - zj * (c / zn)) / zn;
            g.set_column(j, &dc);
        }
    }
    let grad = with_grad.then(|| -(g * x.transpose()) / p);
    (loss / p, grad)
}

fn pair_vectors<'a>(space: &'a EmbeddingSpace, id: &str, side: &str) -> Result<&'a [f64]> {
    let v = space.get(id).ok_or_else(|| {
        Error::Data(format!(
            "translation: {side} skill `{id}` missing from space `{}`",
            space.name
        ))
    })?;
    if norm(v) == 0.0 {
        return Err(Error::Data(format!(
            "translation: {side} skill `{id}` has a zero vector in space `{}`",
            space.name
        )));
    }
    Ok(v)
}

/// Fits `T` with full-batch Adam on mean cosine distance, keeping the matrix
/// with the best loss on a seeded held-out part of the pairs.
pub fn fit_translation(
    src: &EmbeddingSpace,
    dst: &EmbeddingSpace,
    train_pairs: &EquivalenceSet,
    opts: &TranslationOptions,
) -> Result<TranslationMatrix> {
    opts.validate()?;
    let pairs: Vec<&(String, String)> = train_pairs.pairs.iter().collect();
    if pairs.len() < 5 {
        return Err(Error::Data(format!(
            "translation needs at least 5 skill pairs, got {}",
            pairs.len()
        )));
    }
    let (n, m) = (src.dimension(), dst.dimension());
    let mut xs = Vec::with_capacity(pairs.len());
    let mut ys = Vec::with_capacity(pairs.len());
    for (s, d) in &pairs {
        xs.push(DVector::from_column_slice(pair_vectors(src, s, "source")?));
        let y = DVector::from_column_slice(pair_vectors(dst, d, "destination")?);
        ys.push(y.normalize());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((pairs.len() as f64 * opts.validation_fraction).round() as usize).clamp(1, pairs.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let gather = |idx: &[usize], cols: &[DVector<f64>]| {
        let picked: Vec<DVector<f64>> = idx.iter().map(|&i| cols[i].clone()).collect();
        DMatrix::from_columns(&picked)
    };
    let (x_train, y_train) = (gather(train_idx, &xs), gather(train_idx, &ys));
    let (x_val, y_val) = (gather(val_idx, &xs), gather(val_idx, &ys));

    let r = opts.init_range;
    let mut t = DMatrix::from_fn(m, n, |_, _| rng.random_range(-r..r));
    let mut first = DMatrix::<f64>::zeros(m, n);
    let mut second = DMatrix::<f64>::zeros(m, n);
    let initial = cosine_loss(&t, &x_val, &y_val, false).0;
    let mut best = (initial, 0usize, t.clone());
    let mut stale = 0usize;
    let mut epochs_run = 0;
    for epoch in 1..=opts.max_epochs {
        let (_, grad) = cosine_loss(&t, &x_train, &y_train, true);
        let grad = grad.expect("requested");
        first = opts.beta1 * first + (1.0 - opts.beta1) * &grad;
        second = opts.beta2 * second + (1.0 - opts.beta2) * grad.component_mul(&grad);
        let c1 = 1.0 - opts.beta1.powi(epoch as i32);
        let c2 = 1.0 - opts.beta2.powi(epoch as i32);
        t.zip_zip_apply(&first, &second, |w, mo, v| {
            *w -= opts.learning_rate * (mo / c1) / ((v / c2).sqrt() + opts.epsilon);
        });
        epochs_run = epoch;
        let val = cosine_loss(&t, &x_val, &y_val, false).0;
        if !val.is_finite() {
            return Err(Error::Numerical(format!(
                "translation: non-finite validation loss at epoch {epoch}"
            )));
        }
        if val < best.0 {
            best = (val, epoch, t.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= opts.patience {
                break;
            }
        }
    }
    Ok(TranslationMatrix {
        matrix: best.2,
        source_space_name: src.name.clone(),
        destination_space_name: dst.name.clone(),
        training_meta: TrainingMeta {
            epochs_run,
            best_epoch: best.1,
            initial_validation_loss: initial,
            best_validation_loss: best.0,
            training_pairs: train_idx.len(),
            validation_pairs: val_idx.len(),
        },
    })
}

/// Multiplies every vector by the matrix. The result lives in the
/// destination's coordinates, so it is marked shared with it.
pub fn apply_translation(t: &TranslationMatrix, space: &EmbeddingSpace) -> Result<EmbeddingSpace> {
    if space.dimension() != t.matrix.ncols() {
        return Err(Error::Dimension {
            expected: t.matrix.ncols(),
            found: space.dimension(),
        });
    }
    let mut out = space.map_vectors(
        &format!("{}>{}", space.name, t.destination_space_name),
        t.matrix.nrows(),
        |_, v| (&t.matrix * DVector::from_column_slice(v)).as_slice().to_vec(),
    )?;
    out.alignment = Alignment::Shared;
    out.provenance = space
        .provenance
        .clone()
        .with("translated_from", &space.name)
        .with("translated_to", &t.destination_space_name);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub dst: Target,
    /// Cosine to the destination skill; kept when the entry is turned into
    /// a None prediction.
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RankedPredictions {
    /// `None` means the full ranking.
    pub k: Option<usize>,
    pub by_source: BTreeMap<String, Vec<Prediction>>,
    pub excluded_sources: Vec<String>,
    pub excluded_destinations: Vec<String>,
}

impl RankedPredictions {
    pub fn top(&self, src: &str) -> Option<&Prediction> {
        self.by_source.get(src).and_then(|p| p.first())
    }

    /// Rows of `src_skill, rank, dst_skill, similarity`.
    pub fn write_delimited<W: Write>(&self, mut w: W, delimiter: char) -> Result<()> {
        writeln!(w, "src_skill{delimiter}rank{delimiter}dst_skill{delimiter}similarity")?;
        for (src, preds) in &self.by_source {
            for (i, p) in preds.iter().enumerate() {
                writeln!(
                    w,
                    "{}{delimiter}{}{delimiter}{}{delimiter}{:.6}",
                    escape_identifier(src),
                    i + 1,
                    escape_identifier(&p.dst.to_string()),
                    p.similarity
                )?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_delimited(&mut w, '\t')?;
        w.flush()?;
        Ok(())
    }
}

fn rank_one(v: &[f64], dst: &[(&str, &[f64])], k: usize) -> Vec<Prediction> {
    let mut scored: Vec<(&str, f64)> = dst
        .iter()
        .map(|(id, w)| (*id, cosine(v, w).expect("zero vectors filtered")))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    scored.truncate(k);
    scored
        .into_iter()
        .map(|(id, s)| Prediction {
            dst: Target::Skill(id.to_string()),
            similarity: s,
        })
        .collect()
}

/// Cosine ranking of every destination skill for every source skill; ties
/// go to the smaller destination id. `k = None` keeps the full ranking.
pub fn rank_equivalents(src: &EmbeddingSpace, dst: &EmbeddingSpace, k: Option<usize>) -> Result<RankedPredictions> {
    if k == Some(0) {
        return Err(Error::Config("ranking cutoff k must be at least 1".into()));
    }
    if src.alignment == Alignment::PlatformLocal {
        return Err(Error::Data(format!(
            "source space `{}` is platform-local; translate it into the destination space first",
            src.name
        )));
    }
    if dst.is_empty() {
        return Err(Error::Data(format!("destination space `{}` is empty", dst.name)));
    }
    if src.dimension() != dst.dimension() {
        return Err(Error::Dimension {
            expected: dst.dimension(),
            found: src.dimension(),
        });
    }
    let (dst_vectors, excluded_destinations): (Vec<_>, Vec<_>) = dst.iter().partition(|(_, v)| norm(v) > 0.0);
    let (src_vectors, excluded_sources): (Vec<_>, Vec<_>) = src.iter().partition(|(_, v)| norm(v) > 0.0);
    let limit = k.unwrap_or(usize::MAX);

    #[cfg(feature = "parallel")]
    let ranked: Vec<Vec<Prediction>> = {
        use rayon::prelude::*;
        src_vectors
            .par_iter()
            .map(|(_, v)| rank_one(v, &dst_vectors, limit))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let ranked: Vec<Vec<Prediction>> = src_vectors
        .iter()
        .map(|(_, v)| rank_one(v, &dst_vectors, limit))
        .collect();

    let excluded = |v: Vec<(&str, &[f64])>| v.into_iter().map(|(id, _)| id.to_string()).collect::<Vec<_>>();
    let excluded_sources = excluded(excluded_sources);
    let excluded_destinations = excluded(excluded_destinations);
    if !excluded_sources.is_empty() || !excluded_destinations.is_empty() {
        log::warn!(
            "ranking `{}` -> `{}`: excluded {} source and {} destination zero vectors",
            src.name,
            dst.name,
            excluded_sources.len(),
            excluded_destinations.len()
        );
    }
    Ok(RankedPredictions {
        k,
        by_source: src_vectors.iter().map(|(id, _)| id.to_string()).zip(ranked).collect(),
        excluded_sources,
        excluded_destinations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Provenance;
    use proptest::prelude::*;
    use rand::Rng;

    fn space(name: &str, rows: &[(&str, Vec<f64>)]) -> EmbeddingSpace {
        let mut s = EmbeddingSpace::new(name, rows[0].1.len(), Alignment::Shared, Provenance::new("test"));
        for (id, v) in rows {
            s.insert(*id, v.clone()).unwrap();
        }
        s
    }

    fn random_space(name: &str, count: usize, dim: usize, rng: &mut ChaCha8Rng) -> EmbeddingSpace {
        let mut s = EmbeddingSpace::new(name, dim, Alignment::Shared, Provenance::new("test"));
        for i in 0..count {
            s.insert(
                format!("s{i:02}"),
                (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            )
            .unwrap();
        }
        s
    }

    fn identity_pairs(space: &EmbeddingSpace) -> EquivalenceSet {
        let mut e = EquivalenceSet::default();
        for id in space.ids() {
            e.insert_pair(id, id).unwrap();
        }
        e
    }

    fn mean_cosine(t: &TranslationMatrix, src: &EmbeddingSpace, dst: &EmbeddingSpace, ids: &[&str]) -> f64 {
        let moved = apply_translation(t, src).unwrap();
        ids.iter()
            .map(|id| cosine(moved.get(id).unwrap(), dst.get(id).unwrap()).unwrap())
            .sum::<f64>()
            / ids.len() as f64
    }

    #[test]
    fn learns_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_space("A", 30, 6, &mut rng);
        let t = fit_translation(&s, &s, &identity_pairs(&s), &TranslationOptions::default()).unwrap();
        let ids: Vec<&str> = s.ids().collect();
        assert!(mean_cosine(&t, &s, &s, &ids) >= 0.999);
        assert!(t.training_meta.best_validation_loss <= t.training_meta.initial_validation_loss);
    }

    #[test]
    fn learns_rotation_and_generalizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let dim = 5;
        let src = random_space("A", 50, dim, &mut rng);
        let q = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0)).qr().q();
        let dst = src
            .map_vectors("B", dim, |_, v| {
                (&q * DVector::from_column_slice(v)).as_slice().to_vec()
            })
            .unwrap();
        let ids: Vec<&str> = src.ids().collect();
        let (train, test) = ids.split_at(40);
        let mut pairs = EquivalenceSet::default();
        for id in train {
            pairs.insert_pair(id, id).unwrap();
        }
        let t = fit_translation(&src, &dst, &pairs, &TranslationOptions::default()).unwrap();
        let held_out = mean_cosine(&t, &src, &dst, test);
        assert!(held_out >= 0.99, "held-out mean cosine {held_out}");
    }

    #[test]
    fn precondition_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_space("A", 4, 3, &mut rng);
        let err = fit_translation(&s, &s, &identity_pairs(&s), &TranslationOptions::default()).unwrap_err();
        assert!(err.to_string().contains("at least 5"));

        let mut s = random_space("A", 6, 3, &mut rng);
        s.insert("zero", vec![0.0; 3]).unwrap();
        let err = fit_translation(&s, &s, &identity_pairs(&s), &TranslationOptions::default()).unwrap_err();
        assert!(err.to_string().contains("`zero`"), "{err}");
    }

    #[test]
    fn fit_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = random_space("A", 10, 3, &mut rng);
        let opts = TranslationOptions {
            max_epochs: 50,
            ..Default::default()
        };
        let a = fit_translation(&s, &s, &identity_pairs(&s), &opts).unwrap();
        let b = fit_translation(&s, &s, &identity_pairs(&s), &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (m, n, p) = (3, 4, 7);
        let t = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
        let mut y = DMatrix::from_fn(m, p, |_, _| rng.random_range(-1.0..1.0));
        for mut c in y.column_iter_mut() {
            c.normalize_mut();
        }
        let grad = cosine_loss(&t, &x, &y, true).1.unwrap();
        let eps = 1e-6;
        for i in 0..m {
            for j in 0..n {
                let mut plus = t.clone();
                plus[(i, j)] += eps;
                let mut minus = t.clone();
                minus[(i, j)] -= eps;
                let fd = (cosine_loss(&plus, &x, &y, false).0 - cosine_loss(&minus, &x, &y, false).0) / (2.0 * eps);
                assert!((fd - grad[(i, j)]).abs() < 1e-7, "{fd} vs {}", grad[(i, j)]);
            }
        }
    }

    #[test]
    fn apply_examples() {
        let t = TranslationMatrix {
            matrix: DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]),
            source_space_name: "A".into(),
            destination_space_name: "B".into(),
            training_meta: TrainingMeta::default(),
        };
        let s = space("A", &[("x", vec![1.0, 1.0]), ("z", vec![0.0, 0.0])]);
        let out = apply_translation(&t, &s).unwrap();
        assert_eq!(out.get("x").unwrap(), &[2.0, 1.0]);
        assert_eq!(out.get("z").unwrap(), &[0.0, 0.0]);
        let same = apply_translation(&TranslationMatrix::identity(&s), &s).unwrap();
        assert_eq!(same.get("x"), s.get("x"));
        let wrong = space("C", &[("x", vec![1.0, 1.0, 1.0])]);
        assert!(matches!(apply_translation(&t, &wrong), Err(Error::Dimension { .. })));
    }

    #[test]
    fn matrix_text_round_trip() {
        let t = TranslationMatrix {
            matrix: DMatrix::from_row_slice(2, 3, &[1.0, -2.5, 3.0, 0.1, 1e-17, 7.0]),
            source_space_name: "A".into(),
            destination_space_name: "B".into(),
            training_meta: TrainingMeta::default(),
        };
        let mut buf = Vec::new();
        t.write_text(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("2 3\n"));
        assert_eq!(TranslationMatrix::read_text(&buf[..], "A", "B").unwrap(), t);
        assert!(TranslationMatrix::read_text(&b"2 3\n1 2 3\n"[..], "A", "B").is_err());
    }

    #[test]
    fn ranking_examples() {
        let src = space("S", &[("q", vec![1.0, 0.0]), ("z", vec![0.0, 0.0])]);
        let dst = space(
            "D",
            &[("B", vec![1.0, 1.0]), ("A", vec![1.0, 0.0]), ("C", vec![0.0, 0.0])],
        );
        let r = rank_equivalents(&src, &dst, Some(10)).unwrap();
        let q = &r.by_source["q"];
        assert_eq!(q.len(), 2);
        assert_eq!(q[0].dst, Target::Skill("A".into()));
        assert!((q[0].similarity - 1.0).abs() < 1e-15);
        assert!((q[1].similarity - 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(r.excluded_sources, vec!["z".to_string()]);
        assert_eq!(r.excluded_destinations, vec!["C".to_string()]);
    }

    #[test]
    fn ranking_ties_and_errors() {
        let src = space("S", &[("q", vec![1.0, 0.0])]);
        let dst = space(
            "D",
            &[("b", vec![0.0, 1.0]), ("a", vec![0.0, 2.0]), ("c", vec![3.0, 0.0])],
        );
        let r = rank_equivalents(&src, &dst, Some(2)).unwrap();
        let order: Vec<String> = r.by_source["q"].iter().map(|p| p.dst.to_string()).collect();
        assert_eq!(order, ["c", "a"]);
        assert!(rank_equivalents(&src, &dst, Some(0)).is_err());
        let empty = EmbeddingSpace::new("E", 2, Alignment::Shared, Provenance::new("test"));
        assert!(rank_equivalents(&src, &empty, None).is_err());
        let mut local = src.clone();
        local.alignment = Alignment::PlatformLocal;
        assert!(rank_equivalents(&local, &dst, None).is_err());
    }

    #[test]
    fn predictions_export() {
        let src = space("S", &[("q", vec![1.0, 0.0])]);
        let dst = space("D", &[("A", vec![1.0, 0.0])]);
        let r = rank_equivalents(&src, &dst, None).unwrap();
        let mut buf = Vec::new();
        r.write_delimited(&mut buf, '\t').unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "src_skill\trank\tdst_skill\tsimilarity\nq\t1\tA\t1.000000\n"
        );
    }

    proptest! {
        #[test]
        fn ranking_is_scale_invariant(
            vecs in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 4..10),
            scales in prop::collection::vec(0.01f64..100.0, 10),
        ) {
            let rows: Vec<(String, Vec<f64>)> = vecs.iter().enumerate().map(|(i, v)| (format!("d{i}"), v.clone())).collect();
            let rows_ref: Vec<(&str, Vec<f64>)> = rows.iter().map(|(a, b)| (a.as_str(), b.clone())).collect();
            let scaled: Vec<(&str, Vec<f64>)> = rows.iter().zip(&scales)
                .map(|((a, b), s)| (a.as_str(), b.iter().map(|x| x * s).collect())).collect();
            let src = space("S", &rows_ref[..2]);
            let a = rank_equivalents(&src, &space("D", &rows_ref), None).unwrap();
            let b = rank_equivalents(&src, &space("D", &scaled), None).unwrap();
            for (pa, pb) in a.by_source.values().flatten().zip(b.by_source.values().flatten()) {
                prop_assert!((pa.similarity - pb.similarity).abs() < 1e-9);
                prop_assert!(pa.similarity.abs() <= 1.0);
            }
            for (ra, rb) in a.by_source.values().zip(b.by_source.values()) {
                // ties could reorder only when similarities coincide within rounding
                let sa: Vec<f64> = ra.iter().map(|p| p.similarity).collect();
                let sb: Vec<f64> = rb.iter().map(|p| p.similarity).collect();
                for (x, y) in sa.iter().zip(&sb) { prop_assert!((x - y).abs() < 1e-9); }
            }
        }

        #[test]
        fn translation_is_linear(
            entries in prop::collection::vec(-2.0f64..2.0, 6),
            u in prop::collection::vec(-5.0f64..5.0, 3),
            v in prop::collection::vec(-5.0f64..5.0, 3),
        ) {
            let t = TranslationMatrix {
                matrix: DMatrix::from_row_slice(2, 3, &entries),
                source_space_name: "A".into(),
                destination_space_name: "B".into(),
                training_meta: TrainingMeta::default(),
            };
            let sum: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + b).collect();
            let s = space("A", &[("u", u), ("v", v), ("w", sum)]);
            let out = apply_translation(&t, &s).unwrap();
            let chained = apply_translation(&t, &apply_translation(&TranslationMatrix::identity(&s), &s).unwrap()).unwrap();
            for i in 0..2 {
                let lhs = out.get("w").unwrap()[i];
                let rhs = out.get("u").unwrap()[i] + out.get("v").unwrap()[i];
                prop_assert!((lhs - rhs).abs() < 1e-9);
                prop_assert!((chained.get("w").unwrap()[i] - lhs).abs() < 1e-12);
            }
        }
    }
}
