use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Interaction, PlatformCorpus};

/// One skill sequence per student, students in id order. Interactions are
/// ordered by start time, ties by original row; skills sharing one
/// interaction are shuffled with a generator seeded by `seed`.
pub fn build_skill_sequences(corpus: &PlatformCorpus, seed: u64) -> Vec<Vec<String>> {
    let mut by_student: BTreeMap<&str, Vec<&Interaction>> = BTreeMap::new();
    for i in &corpus.interactions {
        by_student.entry(&i.student_id).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    by_student
        .into_values()
        .map(|mut rows| {
            rows.sort_by_key(|i| (i.start_time, i.row));
            let mut seq = Vec::with_capacity(rows.len());
            for i in rows {
                if i.skill_ids.len() > 1 {
                    let mut skills = i.skill_ids.clone();
                    skills.shuffle(&mut rng);
                    seq.extend(skills);
                } else {
                    seq.extend(i.skill_ids.iter().cloned());
                }
            }
            seq
        })
        .collect()
}
