use crate::error::{Error, Result};
use crate::executor::{ChunkedPair, Program};
use crate::knowledge::Lexicon;
use crate::policy::{Policy, StepDistribution};
use crate::scalar::Scalar;

/// An objective value together with its parameter gradient.
#[derive(Clone, Debug)]
pub struct Objective<S, G> {
    pub value: S,
    pub grad: G,
}

/// `J = -Σ_t log p_t[r_t] R_t` over the rewarded steps, with gradient
/// `-Σ_t R_t ∇ log p_t[r_t]`.
///
/// `probs` are the step distributions the program was scored under; they
/// are only read for the objective value.
pub fn reinforce<S: Scalar, P: Policy<S>>(
    policy: &P,
    pair: &ChunkedPair,
    lex: &Lexicon,
    program: &Program,
    probs: &[StepDistribution<S>],
    rewards: &[S],
) -> Result<Objective<S, P::Grad>> {
    if rewards.len() > program.len() || probs.len() < rewards.len() {
        return Err(Error::LengthMismatch { expected: program.len(), got: rewards.len() });
    }
    let mut value = S::zero();
    let mut grad = policy.zero_grad();
    for (i, &r) in rewards.iter().enumerate() {
        if r.is_zero() {
            continue;
        }
        let t = i + 1;
        let action = program.at(t);
        value = value - probs[i].prob(action).ln() * r;
        policy.accumulate(pair, t, lex, action, -r, &mut grad)?;
    }
    if !value.is_finite() {
        return Err(Error::NonFinite(format!("objective {value} for program {program}")));
    }
    Ok(Objective { value, grad })
}

/// `λ J + (1 - λ) J'`.
pub fn hybrid<S: Scalar, P: Policy<S>>(
    policy: &P,
    j: Objective<S, P::Grad>,
    j_revised: Objective<S, P::Grad>,
    lambda: S,
) -> Objective<S, P::Grad> {
    let mut grad = policy.zero_grad();
    scaled_add(policy, &mut grad, &j.grad, lambda);
    scaled_add(policy, &mut grad, &j_revised.grad, S::one() - lambda);
    Objective { value: lambda * j.value + (S::one() - lambda) * j_revised.value, grad }
}

fn scaled_add<S: Scalar, P: Policy<S>>(policy: &P, into: &mut P::Grad, g: &P::Grad, k: S) {
    if k.is_zero() {
        return;
    }
    let mut scaled = g.clone();
    policy.scale_grad(&mut scaled, k);
    policy.add_grads(into, &scaled);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunker::ChunkRules;
    use crate::policy::{LinearPolicy, PolicyParams, NUM_FEATURES};
    use crate::relation::ActionRelation as A;
    use crate::trainer::reward::{reward, RewardConfig};
    use proptest::prelude::*;

    fn pair() -> ChunkedPair {
        ChunkedPair::parse("some dogs run", "some animals run", &ChunkRules::fragment()).unwrap()
    }

    #[test]
    fn zero_rewards_zero_objective() {
        let policy = LinearPolicy::<f64>::zeros();
        let lex = Lexicon::fragment();
        let prog = Program::uniform(A::Equivalence, 2);
        let probs = policy.distributions(&pair(), &lex).unwrap();
        let j = reinforce(&policy, &pair(), &lex, &prog, &probs, &[0.0, 0.0]).unwrap();
        assert_eq!(j.value, 0.0);
        assert!(j.grad.is_zero());
    }

    #[test]
    fn single_step_half_probability() {
        let policy = LinearPolicy::<f64>::zeros();
        let lex = Lexicon::fragment();
        let p = pair();
        let probs = vec![StepDistribution::new([0.5, 0.5, 0.0, 0.0, 0.0]).unwrap()];
        let prog = Program::new(vec![A::Equivalence, A::Equivalence]);
        let j = reinforce(&policy, &p, &lex, &prog, &probs, &[1.0]).unwrap();
        assert!((j.value - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn hybrid_is_linear() {
        let policy = LinearPolicy::<f64>::zeros();
        let mk = |v: f64| {
            let mut g = PolicyParams::zeros(NUM_FEATURES);
            g.as_mut_slice()[0] = v;
            Objective { value: v, grad: g }
        };
        assert_eq!(hybrid(&policy, mk(2.0), mk(4.0), 0.5).value, 3.0);
        assert_eq!(hybrid(&policy, mk(2.0), mk(4.0), 1.0).value, 2.0);
        assert_eq!(hybrid(&policy, mk(2.0), mk(4.0), 0.0).value, 4.0);
        for lambda in [0.0, 0.3, 1.0] {
            let h = hybrid(&policy, mk(2.0), mk(4.0), lambda);
            assert!((h.grad.as_slice()[0] - (2.0 * lambda + 4.0 * (1.0 - lambda))).abs() < 1e-15);
        }
    }

    fn objective_at(params: &PolicyParams<f64>, lex: &Lexicon, prog: &Program, rewards: &[f64]) -> f64 {
        let policy = LinearPolicy { params: params.clone() };
        let probs = policy.distributions(&pair(), lex).unwrap();
        reinforce(&policy, &pair(), lex, prog, &probs, rewards).unwrap().value
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn gradient_matches_finite_differences(
            w in proptest::collection::vec(-1.0f64..1.0, 5 * NUM_FEATURES),
            actions in proptest::collection::vec(0usize..5, 2),
        ) {
            let rows: Vec<Vec<f64>> = w.chunks(NUM_FEATURES).map(<[f64]>::to_vec).collect();
            let params = PolicyParams::from_rows(rows).unwrap();
            let policy = LinearPolicy { params: params.clone() };
            let lex = Lexicon::fragment();
            let prog = Program::new(actions.iter().map(|i| A::ALL[*i]).collect());
            let rewards = reward(&pair(), &prog, crate::relation::NliLabel::Entailment, &RewardConfig::default()).unwrap();
            let probs = policy.distributions(&pair(), &lex).unwrap();
            let j = reinforce(&policy, &pair(), &lex, &prog, &probs, &rewards.values).unwrap();
            let h = 1e-5;
            for k in 0..params.as_slice().len() {
                let mut plus = params.clone();
                plus.as_mut_slice()[k] += h;
                let mut minus = params.clone();
                minus.as_mut_slice()[k] -= h;
                let fd = (objective_at(&plus, &lex, &prog, &rewards.values) - objective_at(&minus, &lex, &prog, &rewards.values)) / (2.0 * h);
                let an = j.grad.as_slice()[k];
                let scale = fd.abs().max(an.abs()).max(1e-3);
                prop_assert!((fd - an).abs() / scale < 1e-6, "k={k} fd={fd} an={an}");
            }
        }
    }
}
