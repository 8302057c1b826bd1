use crate::data::Dataset;
use crate::error::Result;
use crate::query::LinearQuery;

/// Answers `q` as `a_0 |S_0|/|S| + a_1 |S_1|/|S|`, where `a_b` is the answer of
/// sub-mechanism `b` on the label-free rows with label `b`. An empty
/// partition has weight zero and its sub-mechanism is never consulted.
pub fn label_split_answer<F0, F1>(
    q: &LinearQuery,
    sample: &Dataset,
    sub0: F0,
    sub1: F1,
) -> Result<f64>
where
    F0: FnMut(&LinearQuery, &Dataset) -> Result<f64>,
    F1: FnMut(&LinearQuery, &Dataset) -> Result<f64>,
{
    let (s0, s1) = sample.split_by_label()?;
    combine_split(q, &s0, &s1, sub0, sub1)
}

/// [`label_split_answer`] on a sample already split by label.
pub fn combine_split<F0, F1>(
    q: &LinearQuery,
    s0: &Dataset,
    s1: &Dataset,
    mut sub0: F0,
    mut sub1: F1,
) -> Result<f64>
where
    F0: FnMut(&LinearQuery, &Dataset) -> Result<f64>,
    F1: FnMut(&LinearQuery, &Dataset) -> Result<f64>,
{
    let n = (s0.n() + s1.n()) as f64;
    let mut total = 0.0;
    if s0.n() > 0 {
        total += sub0(q, s0)? * (s0.n() as f64 / n);
    }
    if s1.n() > 0 {
        total += sub1(q, s1)? * (s1.n() as f64 / n);
    }
    Ok(total.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::mechanisms::answerer::answer_exact;

    fn labeled(rows: Vec<Vec<f64>>, labels: Vec<bool>) -> Dataset {
        Dataset::from_rows(rows, Some(labels), None).unwrap()
    }

    #[test]
    fn one_sided_partition_equals_full_answer() {
        let s = labeled(vec![vec![0.2], vec![0.4], vec![0.9]], vec![false; 3]);
        let q = LinearQuery::attribute(1).unwrap();
        let mut consulted = false;
        let a = label_split_answer(&q, &s, answer_exact, |q: &LinearQuery, d: &Dataset| {
            consulted = true;
            answer_exact(q, d)
        })
        .unwrap();
        assert!(!consulted);
        assert!((a - answer_exact(&q, &s).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn fixed_sub_answers_recombine_by_partition_size() {
        let rows = vec![vec![0.5]; 100];
        let labels = (0..100).map(|i| i >= 30).collect();
        let s = labeled(rows, labels);
        let q = LinearQuery::attribute(1).unwrap();
        let a = label_split_answer(
            &q,
            &s,
            |_: &LinearQuery, _: &Dataset| Ok(0.2),
            |_: &LinearQuery, _: &Dataset| Ok(0.6),
        )
        .unwrap();
        assert!((a - 0.48).abs() < 1e-12);
    }

    #[test]
    fn unlabeled_sample_is_rejected() {
        let s = Dataset::from_rows(vec![vec![0.5]], None, None).unwrap();
        let q = LinearQuery::attribute(1).unwrap();
        let r = label_split_answer(&q, &s, answer_exact, answer_exact);
        assert!(matches!(r, Err(Error::Config(_))));
    }
}
