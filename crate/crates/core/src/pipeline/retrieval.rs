use super::MatchSet;

/// Image-level descriptor, L2-normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalDescriptor {
    pub id: String,
    pub vector: Vec<f32>,
}

impl GlobalDescriptor {
    pub fn new(id: impl Into<String>, vector: Vec<f32>) -> Self {
        Self {
            id: id.into(),
            vector,
        }
    }

    pub fn dot(&self, other: &GlobalDescriptor) -> f64 {
        self.vector
            .iter()
            .zip(&other.vector)
            .map(|(a, b)| *a as f64 * *b as f64)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.vector
            .iter()
            .map(|v| (*v as f64).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Ids of the `k` database entries with the largest inner product to `query`.
///
/// Ties are broken by ascending id.
pub fn retrieve_topk(query: &GlobalDescriptor, database: &[GlobalDescriptor], k: usize) -> Vec<String> {
    let mut scored: Vec<(f64, &str)> = database.iter().map(|d| (query.dot(d), d.id.as_str())).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    scored.into_iter().take(k).map(|(_, id)| id.to_owned()).collect()
}

/// The `n` most confident matches, by descending confidence then input order.
pub fn select_top_matches(m: &MatchSet, n: usize) -> MatchSet {
    let mut matches = m.matches.clone();
    matches.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
    matches.truncate(n);
    MatchSet {
        id_a: m.id_a.clone(),
        id_b: m.id_b.clone(),
        matches,
    }
}
