use alloc::vec;
use alloc::vec::Vec;

use super::{ExactError, Marginals, QueryResult};
use crate::model::{BayesNet, Evidence, Odometer};

/// Default bound on the number of joint configurations summed by
/// [`enumerate_joint_query`].
pub const DEFAULT_STATE_CAP: u128 = 1 << 22;

/// `P(e)` and posterior marginals by summing `Π_i P(x_i | pa_i)` over every
/// configuration of the unobserved variables.
pub fn enumerate_joint_query(net: &BayesNet, evidence: &Evidence) -> Result<QueryResult, ExactError> {
    enumerate_joint_query_with_cap(net, evidence, DEFAULT_STATE_CAP)
}

pub fn enumerate_joint_query_with_cap(net: &BayesNet, evidence: &Evidence, cap: u128) -> Result<QueryResult, ExactError> {
    evidence.validate(net)?;
    let n = net.len();
    let free: Vec<usize> = (0..n).filter(|&v| !evidence.contains(v)).collect();
    let size = free.iter().fold(1u128, |acc, &v| acc.saturating_mul(net.card(v) as u128));
    if size > cap {
        return Err(ExactError::StateSpaceTooLarge { size, cap });
    }
    let mut full = vec![0usize; n];
    for (v, x) in evidence.iter() {
        full[v] = x;
    }
    let mut sums: Vec<Vec<f64>> = free.iter().map(|&v| vec![0.0; net.card(v)]).collect();
    let mut total = 0.0;
    let mut odo = Odometer::new(free.iter().map(|&v| net.card(v)).collect());
    while let Some(a) = odo.current() {
        for (k, &v) in free.iter().enumerate() {
            full[v] = a[k];
        }
        let p = net.joint_probability(&full);
        total += p;
        for (k, s) in sums.iter_mut().enumerate() {
            s[a[k]] += p;
        }
        odo.advance();
    }
    let marginals = (total > 0.0).then(|| {
        let mut m = Marginals::new(n);
        for (k, &v) in free.iter().enumerate() {
            let mut d = core::mem::take(&mut sums[k]);
            for x in &mut d {
                *x /= total;
            }
            m.set(v, d);
        }
        m
    });
    Ok(QueryResult::from_log(crate::math::ln(total), marginals))
}
