use super::PolicyError;
use crate::scenario::ScenarioTree;

/// Two-period chain on which STP earns only `1 / (2 - eps)` of the reward
/// mass: a likely unit reward followed by an unlikely reward of `1/eps`.
pub fn tight_instance(eps: f64) -> Result<ScenarioTree, PolicyError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(PolicyError::Domain(format!("epsilon {eps} not in (0, 1)")));
    }
    Ok(ScenarioTree::chain(
        1,
        &[(vec![1.0 - eps], vec![1.0]), (vec![eps], vec![1.0 / eps])],
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prophet::{reward_mass_bound, stp_value_recursion};
    use crate::scenario::{tbar_upper_bound, DEFAULT_ENUMERATION_CAP as CAP};
    use approx::assert_abs_diff_eq;

    #[test]
    fn ratio_is_one_over_two_minus_eps() {
        let mut last = f64::INFINITY;
        for eps in [0.9, 0.5, 0.1, 0.01, 0.001] {
            let tree = tight_instance(eps).unwrap();
            assert_abs_diff_eq!(tbar_upper_bound(&tree), 1.0, epsilon = 1e-15);
            let v = stp_value_recursion(&tree, 1, 1.0, CAP).unwrap();
            let r = reward_mass_bound(&tree, CAP).unwrap();
            let ratio = v / r;
            assert_abs_diff_eq!(ratio, 1.0 / (2.0 - eps), epsilon = 1e-12);
            assert!(ratio < last && ratio >= 0.5);
            last = ratio;
        }
        let half = tight_instance(0.5).unwrap();
        assert_abs_diff_eq!(reward_mass_bound(&half, CAP).unwrap(), 1.5, epsilon = 1e-12);
    }

    #[test]
    fn rejects_out_of_range() {
        for eps in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(tight_instance(eps).is_err());
        }
    }
}
