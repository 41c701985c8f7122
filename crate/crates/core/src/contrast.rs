//! Counterfactual / semifactual categorization and comparison orientation.

use crate::error::{ContrastError, InvalidInput};
use crate::types::{Comparison, ContrastLabel, Side};

/// Label a perturbed response by comparing its reward against the reward of
/// the *other* original response.
///
/// A rewrite of the chosen response is a counterfactual when it falls strictly
/// below the rejected original; a rewrite of the rejected response is one when
/// it rises strictly above the chosen original. Ties are semifactual.
pub fn categorize_perturbation(
    side: Side,
    reward_other_original: f64,
    reward_perturbed: f64,
) -> Result<ContrastLabel, InvalidInput> {
    if !reward_other_original.is_finite() {
        return Err(InvalidInput::new(format!(
            "non-finite reward for the opposing original: {reward_other_original}"
        )));
    }
    if !reward_perturbed.is_finite() {
        return Err(InvalidInput::new(format!(
            "non-finite reward for the perturbed response: {reward_perturbed}"
        )));
    }
    let flips = match side {
        Side::Chosen => reward_perturbed < reward_other_original,
        Side::Rejected => reward_perturbed > reward_other_original,
    };
    Ok(if flips {
        ContrastLabel::Counterfactual
    } else {
        ContrastLabel::Semifactual
    })
}

/// Put the response the model prefers into the chosen slot.
///
/// `reward_chosen` and `reward_rejected` score `c.chosen` and `c.rejected` as
/// stored. Returns the (possibly swapped) comparison and whether a swap
/// happened. Exact ties cannot be oriented.
pub fn orient_comparison(
    c: &Comparison,
    reward_chosen: f64,
    reward_rejected: f64,
) -> Result<(Comparison, bool), ContrastError> {
    for r in [reward_chosen, reward_rejected] {
        if !r.is_finite() {
            return Err(InvalidInput::new(format!("comparison {}: non-finite reward {r}", c.id)).into());
        }
    }
    if reward_chosen > reward_rejected {
        Ok((c.clone(), false))
    } else if reward_chosen < reward_rejected {
        Ok((c.swapped(), true))
    } else {
        Err(ContrastError::Unorientable {
            comparison_id: c.id.clone(),
            reward: reward_chosen,
        })
    }
}
