//! Capped water-filling.
//!
//! Given items with weight `w_i > 0`, slope `a_i >= 0` and floor `f_i >= 0`
//! and a budget `b`, find the smallest level `zeta >= 0` such that
//!
//! ```text
//! S(zeta) = sum_i w_i * x_i(zeta) = b,   x_i(zeta) = min{ [(zeta a_i - f_i) / w_i]^+, 1 }.
//! ```
//!
//! Geometrically item `i` is a container whose water starts rising at
//! `f_i / a_i` and is full at `(f_i + w_i) / a_i`. `S` is continuous,
//! nondecreasing and piecewise linear with those breakpoints: a
//! selection-based search over the breakpoints locates the segment holding
//! the budget, and the level is solved exactly on it. Items with `a_i = 0`
//! never receive water.
//!
//! Slopes in the descent solver span many orders of magnitude, so `S` is
//! always evaluated directly with compensated summation instead of being
//! accumulated along the sweep.

use thiserror::Error;

use crate::divergence::CompensatedSum;

/// Relative slack accepted when the budget equals the total capacity.
const CAPACITY_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WaterfillError {
    #[error("item {index} is invalid (weight {weight}, slope {slope}, floor {floor})")]
    InvalidItem {
        index: usize,
        weight: f64,
        slope: f64,
        floor: f64,
    },
    #[error("budget {budget} is outside [0, {capacity}]")]
    InfeasibleBudget { budget: f64, capacity: f64 },
    #[error("budget {budget} is positive but every slope is zero")]
    NoInflow { budget: f64 },
    #[error("budget {budget} exceeds the capacity {capacity} of items with positive slope")]
    InsufficientCapacity { budget: f64, capacity: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaterfillItem {
    pub weight: f64,
    pub slope: f64,
    pub floor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaterfillProblem {
    pub items: Vec<WaterfillItem>,
    pub budget: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaterfillSolution {
    pub level: f64,
    pub allocations: Vec<f64>,
}

impl WaterfillProblem {
    /// `S(zeta)`, the weighted allocation at a given level.
    pub fn filled(&self, level: f64) -> f64 {
        self.items
            .iter()
            .map(|it| it.weight * allocation(level, it.slope, it.floor, it.weight))
            .sum()
    }
}

/// `min{ [(level * slope - floor) / weight]^+, 1 }`, zero for zero slope.
#[inline]
pub fn allocation(level: f64, slope: f64, floor: f64, weight: f64) -> f64 {
    if slope <= 0.0 || weight <= 0.0 {
        return 0.0;
    }
    ((level * slope - floor) / weight).clamp(0.0, 1.0)
}

/// Solves a [`WaterfillProblem`].
pub fn capped_waterfill(prob: &WaterfillProblem) -> Result<WaterfillSolution, WaterfillError> {
    let n = prob.items.len();
    let weights: Vec<f64> = prob.items.iter().map(|it| it.weight).collect();
    let slopes: Vec<f64> = prob.items.iter().map(|it| it.slope).collect();
    let floors: Vec<f64> = prob.items.iter().map(|it| it.floor).collect();
    let mut allocations = vec![0.0; n];
    let mut scratch = Scratch::default();
    let level = waterfill_into(
        &weights,
        &slopes,
        &floors,
        prob.budget,
        &mut allocations,
        &mut scratch,
    )?;
    Ok(WaterfillSolution { level, allocations })
}

/// Reusable buffers for [`waterfill_into`].
#[derive(Debug, Default)]
pub struct Scratch {
    points: Vec<f64>,
    live: Vec<usize>,
}

/// Slice-based core of [`capped_waterfill`]: writes the allocations into
/// `out` and returns the level.
pub fn waterfill_into(
    weights: &[f64],
    slopes: &[f64],
    floors: &[f64],
    budget: f64,
    out: &mut [f64],
    scratch: &mut Scratch,
) -> Result<f64, WaterfillError> {
    let n = weights.len();
    assert!(slopes.len() == n && floors.len() == n && out.len() == n);

    let mut total = CompensatedSum::default();
    let mut active = CompensatedSum::default();
    for i in 0..n {
        let (w, a, f) = (weights[i], slopes[i], floors[i]);
        if !(w > 0.0 && w.is_finite() && a >= 0.0 && a.is_finite() && f >= 0.0 && f.is_finite()) {
            return Err(WaterfillError::InvalidItem {
                index: i,
                weight: w,
                slope: a,
                floor: f,
            });
        }
        total.add(w);
        if a > 0.0 {
            active.add(w);
        }
    }
    let (total, active) = (total.value(), active.value());
    if !(budget >= 0.0) || budget > total * (1.0 + CAPACITY_SLACK) {
        return Err(WaterfillError::InfeasibleBudget {
            budget,
            capacity: total,
        });
    }
    out.fill(0.0);
    if budget == 0.0 {
        return Ok(0.0);
    }
    if active == 0.0 {
        return Err(WaterfillError::NoInflow { budget });
    }
    if budget > active * (1.0 + CAPACITY_SLACK) {
        return Err(WaterfillError::InsufficientCapacity {
            budget,
            capacity: active,
        });
    }

    // Locate the segment holding the budget: the largest breakpoint that
    // still fills less than `budget` and the smallest one filling at least
    // `budget`, narrowing the candidate set around medians. Items full at
    // `lower` or empty at `upper`, judged by their breakpoints, leave the
    // live set.
    let Scratch { points, live } = scratch;
    points.clear();
    live.clear();
    for i in 0..n {
        let a = slopes[i];
        if a > 0.0 {
            points.push(floors[i] / a);
            points.push((floors[i] + weights[i]) / a);
            live.push(i);
        }
    }
    let mut saturated = CompensatedSum::default();
    let mut lower: f64 = 0.0;
    let mut upper = f64::INFINITY;
    let mut candidates = &mut points[..];
    while !candidates.is_empty() {
        let mid = candidates.len() / 2;
        let (below, &mut pivot, above) = candidates.select_nth_unstable_by(mid, f64::total_cmp);
        let mut filled = saturated;
        for &i in live.iter() {
            filled.add((pivot * slopes[i] - floors[i]).clamp(0.0, weights[i]));
        }
        if filled.value() < budget {
            lower = lower.max(pivot);
            candidates = above;
            live.retain(|&i| {
                let full = (floors[i] + weights[i]) / slopes[i] <= lower;
                if full {
                    saturated.add(weights[i]);
                }
                !full
            });
        } else {
            upper = pivot;
            candidates = below;
            live.retain(|&i| floors[i] / slopes[i] < upper);
        }
    }
    if !upper.is_finite() {
        // Budget equals the capacity up to rounding: everything is full.
        upper = lower;
    }

    // On `[lower, upper]` every live item is linear; solve for the level
    // exactly.
    let mut lin_floor = CompensatedSum::default();
    let mut lin_slope = CompensatedSum::default();
    for &i in live.iter() {
        lin_floor.add(floors[i]);
        lin_slope.add(slopes[i]);
    }
    let level = if lin_slope.value() > 0.0 {
        ((budget - saturated.value() + lin_floor.value()) / lin_slope.value()).clamp(lower, upper)
    } else {
        upper
    };
    for i in 0..n {
        out[i] = allocation(level, slopes[i], floors[i], weights[i]);
    }
    Ok(level)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(weight: f64, slope: f64, floor: f64) -> WaterfillItem {
        WaterfillItem {
            weight,
            slope,
            floor,
        }
    }

    /// Bisection on the monotone budget function; returns the smallest level.
    fn bisection_level(prob: &WaterfillProblem) -> f64 {
        let mut hi = 1.0;
        while prob.filled(hi) < prob.budget {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if prob.filled(mid) < prob.budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    #[test]
    fn single_item() {
        let prob = WaterfillProblem {
            items: vec![item(1.0, 1.0, 0.0)],
            budget: 0.5,
        };
        let sol = capped_waterfill(&prob).unwrap();
        assert!((sol.level - 0.5).abs() < 1e-15);
        assert!((sol.allocations[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn saturation() {
        let items = vec![item(1.0, 1.0, 0.2), item(1.0, 2.0, 0.1), item(2.0, 1.0, 0.5)];
        let budget = 4.0;
        let sol = capped_waterfill(&WaterfillProblem {
            items: items.clone(),
            budget,
        })
        .unwrap();
        assert!(sol.allocations.iter().all(|&x| x == 1.0));
        let want = items
            .iter()
            .map(|it| (it.floor + it.weight) / it.slope)
            .fold(0.0, f64::max);
        assert!((sol.level - want).abs() < 1e-12);
    }

    #[test]
    fn four_items_against_bisection() {
        let prob = WaterfillProblem {
            items: vec![
                item(1.0, 1.0, 0.2),
                item(1.0, 2.0, 0.1),
                item(2.0, 1.0, 0.5),
                item(1.0, 4.0, 0.0),
            ],
            budget: 1.3,
        };
        let sol = capped_waterfill(&prob).unwrap();
        let oracle = bisection_level(&prob);
        assert!((sol.level - oracle).abs() < 1e-8, "{} vs {}", sol.level, oracle);
        // Walking the breakpoints by hand: S(0.2) = 1.1 and the slope on [0.2, 0.25] is 7.
        assert!((sol.level - (0.2 + 0.2 / 7.0)).abs() < 1e-14);
        let got: f64 = prob
            .items
            .iter()
            .zip(&sol.allocations)
            .map(|(it, x)| it.weight * x)
            .sum();
        assert!((got - 1.3).abs() < 1e-14);
    }

    #[test]
    fn flat_segment_returns_smallest_level() {
        // Item 0 fills on [0, 1]; item 1 only starts at 3.
        let prob = WaterfillProblem {
            items: vec![item(1.0, 1.0, 0.0), item(1.0, 1.0, 3.0)],
            budget: 1.0,
        };
        let sol = capped_waterfill(&prob).unwrap();
        assert_eq!(sol.level, 1.0);
        assert_eq!(sol.allocations, vec![1.0, 0.0]);
    }

    #[test]
    fn zero_budget() {
        let prob = WaterfillProblem {
            items: vec![item(1.0, 1.0, 0.0), item(1.0, 0.0, 3.0)],
            budget: 0.0,
        };
        let sol = capped_waterfill(&prob).unwrap();
        assert_eq!(sol.level, 0.0);
        assert_eq!(sol.allocations, vec![0.0, 0.0]);
    }

    #[test]
    fn zero_slope_items_stay_empty() {
        let prob = WaterfillProblem {
            items: vec![item(1.0, 0.0, 0.0), item(1.0, 1.0, 0.0)],
            budget: 0.5,
        };
        let sol = capped_waterfill(&prob).unwrap();
        assert_eq!(sol.allocations[0], 0.0);
        assert!((sol.allocations[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        let over = WaterfillProblem {
            items: vec![item(1.0, 1.0, 0.0)],
            budget: 1.5,
        };
        assert!(matches!(
            capped_waterfill(&over),
            Err(WaterfillError::InfeasibleBudget { .. })
        ));
        let negative = WaterfillProblem {
            items: vec![item(1.0, 1.0, 0.0)],
            budget: -0.1,
        };
        assert!(capped_waterfill(&negative).is_err());
        let dry = WaterfillProblem {
            items: vec![item(1.0, 0.0, 0.0)],
            budget: 0.5,
        };
        assert_eq!(
            capped_waterfill(&dry),
            Err(WaterfillError::NoInflow { budget: 0.5 })
        );
        let short = WaterfillProblem {
            items: vec![item(1.0, 0.0, 0.0), item(1.0, 1.0, 0.0)],
            budget: 1.5,
        };
        assert!(matches!(
            capped_waterfill(&short),
            Err(WaterfillError::InsufficientCapacity { .. })
        ));
        let bad = WaterfillProblem {
            items: vec![item(0.0, 1.0, 0.0)],
            budget: 0.0,
        };
        assert!(matches!(
            capped_waterfill(&bad),
            Err(WaterfillError::InvalidItem { index: 0, .. })
        ));
    }
}
