//! Test-only reference implementations, kept independent of the library's
//! union-find sweep.

#![allow(dead_code)]

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topoprompt::{Connectivity, ScalarImage};

/// (extremum index, saddle value, persistence), sorted by extremum index.
pub type PairKey = (usize, Option<f64>, f64);

fn offsets(connectivity: Connectivity) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    for dy in -1i64..=1 {
        for dx in -1i64..=1 {
            if (dx, dy) == (0, 0) {
                continue;
            }
            if connectivity == Connectivity::Four && dx != 0 && dy != 0 {
                continue;
            }
            out.push((dx, dy));
        }
    }
    out
}

/// Labels the connected components of the pixels where `member` is true.
/// Returns one label per pixel (`usize::MAX` outside the set) and the count.
pub fn flood_components(
    member: &[bool],
    w: usize,
    h: usize,
    connectivity: Connectivity,
) -> (Vec<usize>, usize) {
    let offs = offsets(connectivity);
    let mut label = vec![usize::MAX; w * h];
    let mut count = 0;
    for start in 0..w * h {
        if !member[start] || label[start] != usize::MAX {
            continue;
        }
        label[start] = count;
        let mut queue = VecDeque::from([start]);
        while let Some(p) = queue.pop_front() {
            let (x, y) = ((p % w) as i64, (p / w) as i64);
            for &(dx, dy) in &offs {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let q = ny as usize * w + nx as usize;
                if member[q] && label[q] == usize::MAX {
                    label[q] = count;
                    queue.push_back(q);
                }
            }
        }
        count += 1;
    }
    (label, count)
}

/// Pixel indices ordered by value (high first), ties by index.
pub fn tie_broken_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap()
            .then_with(|| a.cmp(&b))
    });
    idx
}

/// Brute-force superlevel sweep: grows the set one pixel at a time in
/// tie-broken order, recomputes its components by flood fill after every
/// step, and reads births and elder-rule deaths off the component changes.
pub fn brute_force_pairs(image: &ScalarImage, connectivity: Connectivity) -> Vec<PairKey> {
    let (w, h) = image.dims();
    let values = image.values();
    let order = tie_broken_order(values);
    let mut position = vec![0; w * h];
    for (k, &p) in order.iter().enumerate() {
        position[p] = k;
    }

    let mut member = vec![false; w * h];
    let mut prev_label = vec![usize::MAX; w * h];
    let mut prev_count = 0;
    let mut pairs = Vec::new();

    for &p in &order {
        member[p] = true;
        let (label, count) = flood_components(&member, w, h, connectivity);
        // Previous components now inside p's component, each named by its
        // eldest pixel.
        let mut eldest_of_prev: Vec<Option<usize>> = vec![None; prev_count];
        for q in 0..w * h {
            let l = prev_label[q];
            if l != usize::MAX && label[q] == label[p] {
                let e = &mut eldest_of_prev[l];
                if e.is_none_or(|cur| position[q] < position[cur]) {
                    *e = Some(q);
                }
            }
        }
        let mut merged: Vec<usize> = eldest_of_prev.into_iter().flatten().collect();
        merged.sort_by_key(|&q| position[q]);
        for &young in merged.iter().skip(1) {
            pairs.push((young, Some(values[p]), values[young] - values[p]));
        }
        prev_label = label;
        prev_count = count;
    }

    // Survivors: the eldest pixel of every final component.
    let mut eldest = vec![None::<usize>; prev_count];
    for q in 0..w * h {
        let e = &mut eldest[prev_label[q]];
        if e.is_none_or(|cur| position[q] < position[cur]) {
            *e = Some(q);
        }
    }
    for q in eldest.into_iter().flatten() {
        pairs.push((q, None, f64::INFINITY));
    }
    pairs.sort_by_key(|p| p.0);
    pairs
}

/// The library diagram reduced to the same keys.
pub fn library_pairs(image: &ScalarImage, connectivity: Connectivity) -> Vec<PairKey> {
    let d = topoprompt::compute_diagram(image, connectivity).unwrap();
    let mut pairs: Vec<PairKey> = d
        .pairs()
        .iter()
        .map(|p| (p.extremum_index, p.saddle_value, p.persistence))
        .collect();
    pairs.sort_by_key(|p| p.0);
    pairs
}

/// Pixels that come before all of their neighbors in tie-broken order.
pub fn count_local_maxima(image: &ScalarImage, connectivity: Connectivity) -> usize {
    let (w, h) = image.dims();
    let values = image.values();
    let order = tie_broken_order(values);
    let mut position = vec![0; w * h];
    for (k, &p) in order.iter().enumerate() {
        position[p] = k;
    }
    let offs = offsets(connectivity);
    (0..w * h)
        .filter(|&p| {
            let (x, y) = ((p % w) as i64, (p / w) as i64);
            offs.iter().all(|&(dx, dy)| {
                let (nx, ny) = (x + dx, y + dy);
                nx < 0
                    || ny < 0
                    || nx >= w as i64
                    || ny >= h as i64
                    || position[ny as usize * w + nx as usize] > position[p]
            })
        })
        .count()
}

/// `w x h` image with integer values drawn uniformly from `0..levels`.
pub fn random_levels(rng: &mut ChaCha8Rng, w: usize, h: usize, levels: u32) -> ScalarImage {
    ScalarImage::from_fn(w, h, |_, _| rng.gen_range(0..levels) as f64).unwrap()
}

/// Smooth bumps plus uniform noise; values are continuous so ties are
/// vanishingly unlikely.
pub fn random_field(seed: u64, w: usize, h: usize) -> ScalarImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bumps: Vec<(f64, f64, f64, f64)> = (0..rng.gen_range(3..9))
        .map(|_| {
            (
                rng.gen_range(0.0..w as f64),
                rng.gen_range(0.0..h as f64),
                rng.gen_range(2.0..8.0),
                rng.gen_range(0.3..1.0),
            )
        })
        .collect();
    let noise: Vec<f64> = (0..w * h).map(|_| rng.gen_range(0.0..0.15)).collect();
    ScalarImage::from_fn(w, h, |x, y| {
        let bump: f64 = bumps
            .iter()
            .map(|&(cx, cy, r, a)| {
                let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                a * (-d2 / (2.0 * r * r)).exp()
            })
            .sum();
        bump + noise[y * w + x]
    })
    .unwrap()
}
