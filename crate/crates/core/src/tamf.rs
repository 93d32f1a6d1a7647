//! PPMI context matrix and text-associated matrix factorization.
//!
//! The factorization models `M ≈ WᵀHT` where `M` is the |S|×|S| PPMI matrix,
//! `T` holds one content vector per skill as columns, and `W` (k×|S|) and
//! `H` (k×d) are learned by exact block coordinate descent on
//! `‖M − WᵀHT‖²_F + (λ/2)(‖W‖²_F + ‖H‖²_F)`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skipgram::window_pairs;
use crate::space::{escape_identifier, Alignment, EmbeddingSpace, Provenance};

#[derive(Debug, Clone, PartialEq)]
pub struct PpmiMatrix {
    pub skills: Vec<String>,
    pub matrix: DMatrix<f64>,
    pub window_size: usize,
    pub pair_count: u64,
}

/// Counts every ordered (center, context) pair within `window_size` and
/// clips the pointwise mutual information at zero.
pub fn build_ppmi(sequences: &[Vec<String>], skills: &[String], window_size: usize) -> Result<PpmiMatrix> {
    if sequences.iter().all(|s| s.is_empty()) {
        return Err(Error::Data("PPMI: no skill sequences".into()));
    }
    if window_size == 0 {
        return Err(Error::Config("PPMI: window size must be at least 1".into()));
    }
    let index: HashMap<&str, usize> = skills.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    if index.len() != skills.len() {
        return Err(Error::Data("PPMI: duplicate skill in skill list".into()));
    }
    let n = skills.len();
    let mut joint = DMatrix::<f64>::zeros(n, n);
    let mut centers = vec![0.0; n];
    let mut contexts = vec![0.0; n];
    let mut total = 0u64;
    for seq in sequences {
        let ids = seq
            .iter()
            .map(|s| {
                index
                    .get(s.as_str())
                    .copied()
                    .ok_or_else(|| Error::Data(format!("PPMI: sequence token `{s}` is not a known skill")))
            })
            .collect::<Result<Vec<_>>>()?;
        for (i, j) in window_pairs(ids.len(), window_size) {
            let (s, c) = (ids[i], ids[j]);
            joint[(s, c)] += 1.0;
            centers[s] += 1.0;
            contexts[c] += 1.0;
            total += 1;
        }
    }
    let silent: Vec<&str> = (0..n)
        .filter(|&i| centers[i] == 0.0)
        .map(|i| skills[i].as_str())
        .collect();
    if !silent.is_empty() {
        log::info!(
            "PPMI: {} skill(s) never occur in a window, zero rows: {}",
            silent.len(),
            silent.join(", ")
        );
    }
    let p = total as f64;
    let matrix = DMatrix::from_fn(n, n, |s, c| {
        let count = joint[(s, c)];
        if count == 0.0 {
            0.0
        } else {
            (count * p / (centers[s] * contexts[c])).ln().max(0.0)
        }
    });
    Ok(PpmiMatrix {
        skills: skills.to_vec(),
        matrix,
        window_size,
        pair_count: total,
    })
}

impl PpmiMatrix {
    /// Sparse triplet text: `#`-prefixed metadata (window, pair count, skill
    /// order) followed by `row<TAB>col<TAB>value` for nonzero entries.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "#window\t{}", self.window_size)?;
        writeln!(w, "#pair_count\t{}", self.pair_count)?;
        for s in &self.skills {
            writeln!(w, "#skill\t{}", escape_identifier(s))?;
        }
        for (i, row) in self.skills.iter().enumerate() {
            for (j, col) in self.skills.iter().enumerate() {
                let v = self.matrix[(i, j)];
                if v != 0.0 {
                    writeln!(w, "{}\t{}\t{v}", escape_identifier(row), escape_identifier(col))?;
                }
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_triplets(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_triplets<R: BufRead>(reader: R) -> Result<PpmiMatrix> {
        let mut skills = Vec::new();
        let mut window_size = 0usize;
        let mut pair_count = 0u64;
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = i as u64 + 1;
            let bad = |m: String| Error::Format {
                line: lineno,
                message: m,
            };
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() == 2 && fields[0].starts_with('#') {
                match fields[0] {
                    "#window" => window_size = fields[1].parse().map_err(|e| bad(format!("window: {e}")))?,
                    "#pair_count" => pair_count = fields[1].parse().map_err(|e| bad(format!("pair count: {e}")))?,
                    "#skill" => skills.push(fields[1].to_string()),
                    other => return Err(bad(format!("unknown metadata `{other}`"))),
                }
            } else if fields.len() == 3 {
                let v: f64 = fields[2].parse().map_err(|e| bad(format!("value: {e}")))?;
                entries.push((lineno, fields[0].to_string(), fields[1].to_string(), v));
            } else {
                return Err(bad(format!("expected 3 tab-separated fields, found {}", fields.len())));
            }
        }
        let index: HashMap<&str, usize> = skills.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let mut matrix = DMatrix::zeros(skills.len(), skills.len());
        for (lineno, r, c, v) in entries {
            match (index.get(r.as_str()), index.get(c.as_str())) {
                (Some(&i), Some(&j)) => matrix[(i, j)] = v,
                _ => {
                    return Err(Error::Format {
                        line: lineno,
                        message: format!("entry ({r}, {c}) names an undeclared skill"),
                    })
                }
            }
        }
        Ok(PpmiMatrix {
            skills,
            matrix,
            window_size,
            pair_count,
        })
    }

    pub fn load(path: &Path) -> Result<PpmiMatrix> {
        PpmiMatrix::read_triplets(BufReader::new(File::open(path)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TamfParams {
    pub k: usize,
    pub lambda: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for TamfParams {
    fn default() -> Self {
        TamfParams {
            k: 50,
            lambda: 1.0,
            tolerance: 1e-4,
            max_iterations: 100,
            seed: 0,
        }
    }
}

impl TamfParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("TAMF: k must be at least 1".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config("TAMF: lambda must be finite and non-negative".into()));
        }
        if !(self.tolerance >= 0.0) || self.max_iterations == 0 {
            return Err(Error::Config("TAMF: need tolerance ≥ 0 and max_iterations ≥ 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TamfFactorization {
    pub skills: Vec<String>,
    pub w: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub t_content: DMatrix<f64>,
    pub k: usize,
    pub lambda: f64,
    /// Initial loss, then the loss after every half-step.
    pub loss_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Frobenius norms of the final gradients with respect to W and H.
    pub gradient_norms: (f64, f64),
}

impl TamfFactorization {
    pub fn final_loss(&self) -> f64 {
        *self.loss_trace.last().expect("loss trace starts with the initial loss")
    }
}

pub fn tamf_loss(m: &DMatrix<f64>, w: &DMatrix<f64>, h: &DMatrix<f64>, t: &DMatrix<f64>, lambda: f64) -> f64 {
    let r = m - w.transpose() * (h * t);
    r.norm_squared() + 0.5 * lambda * (w.norm_squared() + h.norm_squared())
}

/// Analytic gradients `(∂L/∂W, ∂L/∂H)`.
pub fn tamf_gradients(
    m: &DMatrix<f64>,
    w: &DMatrix<f64>,
    h: &DMatrix<f64>,
    t: &DMatrix<f64>,
    lambda: f64,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let a = h * t;
    let r = m - w.transpose() * &a;
    let gw = -2.0 * &a * r.transpose() + lambda * w;
    let gh = -2.0 * w * &r * t.transpose() + lambda * h;
    (gw, gh)
}

fn singular(lambda: f64) -> Error {
    if lambda == 0.0 {
        Error::Numerical("TAMF: singular normal equations with lambda = 0; use lambda > 0".into())
    } else {
        Error::Numerical("TAMF: singular normal equations".into())
    }
}

/// Least squares `X` with `a X ≈ b` through the SVD of `a`, which needs
/// full column rank. Avoids the squared conditioning of normal equations.
fn full_rank_lstsq(a: DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (rows, cols) = a.shape();
    if rows < cols {
        return Err(singular(0.0));
    }
    let svd = a.svd(true, true);
    let max = svd.singular_values.amax();
    let tol = rows.max(cols) as f64 * f64::EPSILON * max;
    if !(svd.singular_values.min() > tol) {
        return Err(singular(0.0));
    }
    svd.solve(b, tol).map_err(|e| Error::Numerical(format!("TAMF: {e}")))
}

/// Exact minimizer over W with H fixed: `(2AAᵀ + λI)W = 2AMᵀ`, `A = HT`.
pub fn solve_w_step(m: &DMatrix<f64>, h: &DMatrix<f64>, t: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    let a = h * t;
    if lambda == 0.0 {
        return full_rank_lstsq(a.transpose(), &m.transpose());
    }
    let k = a.nrows();
    let lhs = 2.0 * &a * a.transpose() + lambda * DMatrix::identity(k, k);
    let rhs = 2.0 * &a * m.transpose();
    let chol = Cholesky::new(lhs.clone()).ok_or_else(|| singular(lambda))?;
    // Cholesky of a numerically singular PSD matrix can succeed with a tiny pivot.
    let diag = chol.l_dirty().diagonal();
    let max_pivot = lhs.diagonal().amax().max(f64::MIN_POSITIVE);
    if diag.iter().any(|&d| d * d <= 1e-13 * max_pivot) {
        return Err(singular(lambda));
    }
    Ok(chol.solve(&rhs))
}

/// Exact minimizer over H with W fixed. Stationarity reads
/// `2(WWᵀ)H(TTᵀ) + λH = 2WMTᵀ`; both Gram matrices are symmetric, so in
/// their eigenbases the system becomes elementwise division.
pub fn solve_h_step(m: &DMatrix<f64>, w: &DMatrix<f64>, t: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    if lambda == 0.0 {
        // H = (Wᵀ)⁺ M T⁺, unique when Wᵀ has full column rank and T full row rank
        let x = full_rank_lstsq(w.transpose(), m)?;
        return Ok(full_rank_lstsq(t.transpose(), &x.transpose())?.transpose());
    }
    let p = SymmetricEigen::new(w * w.transpose());
    let q = SymmetricEigen::new(t * t.transpose());
    let c = 2.0 * w * m * t.transpose();
    let mut ch = p.eigenvectors.transpose() * c * &q.eigenvectors;
    let scale = 2.0 * p.eigenvalues.amax() * q.eigenvalues.amax() + lambda;
    for i in 0..ch.nrows() {
        for j in 0..ch.ncols() {
            let denom = 2.0 * p.eigenvalues[i].max(0.0) * q.eigenvalues[j].max(0.0) + lambda;
            if !(denom > 1e-13 * scale) {
                return Err(singular(lambda));
            }
            ch[(i, j)] /= denom;
        }
    }
    Ok(&p.eigenvectors * ch * q.eigenvectors.transpose())
}

/// Factorizes the PPMI matrix against the skills' content vectors and returns
/// the `[W[:,s], (HT)[:,s]]` embedding (dimension 2k) for every skill.
pub fn tamf_factorize(
    ppmi: &PpmiMatrix,
    content: &EmbeddingSpace,
    params: &TamfParams,
) -> Result<(EmbeddingSpace, TamfFactorization)> {
    params.validate()?;
    let n = ppmi.skills.len();
    if n == 0 {
        return Err(Error::Data("TAMF: empty PPMI matrix".into()));
    }
    let missing: Vec<&str> = ppmi
        .skills
        .iter()
        .filter(|s| !content.contains(s))
        .map(String::as_str)
        .collect();
    if !missing.is_empty() {
        return Err(Error::Data(format!(
            "TAMF: content space `{}` lacks {} skill(s): {}",
            content.name,
            missing.len(),
            missing.join(", ")
        )));
    }
    let d = content.dimension();
    let k = params.k;
    let mut t = DMatrix::<f64>::zeros(d, n);
    for (j, s) in ppmi.skills.iter().enumerate() {
        let v = content.get(s).expect("checked");
        let len = crate::space::norm(v);
        if len > 0.0 {
            for i in 0..d {
                t[(i, j)] = v[i] / len;
            }
        }
    }
    let m = &ppmi.matrix;
    let lambda = params.lambda;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let bound = 0.5 / k as f64;
    let mut w = DMatrix::from_fn(k, n, |_, _| rng.random_range(-bound..bound));
    let mut h = DMatrix::from_fn(k, d, |_, _| rng.random_range(-bound..bound));

    let finite = |l: f64| {
        if l.is_finite() {
            Ok(l)
        } else {
            Err(Error::Numerical("TAMF: non-finite loss".into()))
        }
    };
    let mut trace = vec![finite(tamf_loss(m, &w, &h, &t, lambda))?];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < params.max_iterations {
        let before = *trace.last().unwrap();
        w = solve_w_step(m, &h, &t, lambda)?;
        trace.push(finite(tamf_loss(m, &w, &h, &t, lambda))?);
        h = solve_h_step(m, &w, &t, lambda)?;
        let after = finite(tamf_loss(m, &w, &h, &t, lambda))?;
        trace.push(after);
        iterations += 1;
        if after == 0.0 || (before - after) / before < params.tolerance {
            converged = true;
            break;
        }
    }
    let (gw, gh) = tamf_gradients(m, &w, &h, &t, lambda);

    let ht = &h * &t;
    let prefix = content.name.split(':').next().unwrap_or_default();
    let prov = Provenance::new("tamf")
        .with("k", k)
        .with("lambda", lambda)
        .with("window_size", ppmi.window_size)
        .with("iterations", iterations)
        .with("content", &content.name)
        .with("seed", params.seed);
    let mut space = EmbeddingSpace::new(format!("{prefix}:tamf"), 2 * k, Alignment::PlatformLocal, prov);
    for (j, s) in ppmi.skills.iter().enumerate() {
        let v: Vec<f64> = w.column(j).iter().chain(ht.column(j).iter()).copied().collect();
        space.insert(s.clone(), v)?;
    }
    let fact = TamfFactorization {
        skills: ppmi.skills.clone(),
        w,
        h,
        t_content: t,
        k,
        lambda,
        loss_trace: trace,
        iterations,
        converged,
        gradient_norms: (gw.norm(), gh.norm()),
    };
    Ok((space, fact))
}
