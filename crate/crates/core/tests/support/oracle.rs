//! Reference implementations used only by tests.
//!
//! Nothing here calls into the library's matching, merging, NMS or AP code;
//! each routine is written from the rules directly, favouring brute force
//! over efficiency.

#![allow(dead_code)]

use std::cmp::Ordering;

/// Plain box for the oracles: corners, score, detector, category.
#[derive(Debug, Clone, PartialEq)]
pub struct RefBox {
    pub c: [f64; 4],
    pub score: f64,
    pub detector: String,
}

/// Expected output box: corners, score, consensus count.
#[derive(Debug, Clone, PartialEq)]
pub struct RefOut {
    pub c: [f64; 4],
    pub score: f64,
    pub n: u32,
}

pub fn ref_iou(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let w = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let h = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = w * h;
    if inter == 0.0 {
        return 0.0;
    }
    let area = |c: &[f64; 4]| (c[2] - c[0]) * (c[3] - c[1]);
    (inter / (area(a) + area(b) - inter)).min(1.0)
}

fn lex(a: &[f64; 4], b: &[f64; 4]) -> Ordering {
    for i in 0..4 {
        match a[i].total_cmp(&b[i]) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// Greedy NMS written out longhand: repeatedly pick the best remaining box.
pub fn ref_nms(mut boxes: Vec<RefOut>, thresh: f64) -> Vec<RefOut> {
    let mut kept = Vec::new();
    while !boxes.is_empty() {
        let mut best = 0;
        for i in 1..boxes.len() {
            let (a, b) = (&boxes[i], &boxes[best]);
            if a.score > b.score || (a.score == b.score && lex(&a.c, &b.c) == Ordering::Less) {
                best = i;
            }
        }
        let top = boxes.remove(best);
        boxes.retain(|b| ref_iou(&top.c, &b.c) < thresh);
        kept.push(top);
    }
    kept
}

pub fn ref_reweight(score: f64, n: u32, beta: f64, n_ref: u32) -> f64 {
    let e = n as i32 - n_ref as i32;
    let mut denom = 1.0;
    if e >= 0 {
        for _ in 0..e {
            denom *= beta;
        }
    } else {
        for _ in 0..(-e) {
            denom /= beta;
        }
    }
    score.powf(1.0 / denom).clamp(0.0, 1.0)
}

/// Full merge of one frame, single category, by exhaustive enumeration of
/// tuple selections.
///
/// `policy` is one of `reweight`, `keep-all`, `drop-singletons`.
pub fn ref_ensemble(
    boxes: &[RefBox],
    thresh: f64,
    beta: f64,
    n_ref: u32,
    policy: &str,
) -> Vec<RefOut> {
    let n = boxes.len();
    let mut dets: Vec<&str> = boxes.iter().map(|b| b.detector.as_str()).collect();
    dets.sort();
    dets.dedup();

    // nearest[i][d]
    let mut nearest = vec![vec![None; dets.len()]; n];
    for i in 0..n {
        for (d, name) in dets.iter().enumerate() {
            if *name == boxes[i].detector {
                continue;
            }
            let mut cands: Vec<usize> = (0..n)
                .filter(|&j| boxes[j].detector == *name && ref_iou(&boxes[i].c, &boxes[j].c) >= thresh)
                .collect();
            cands.sort_by(|&x, &y| {
                let (ix, iy) = (ref_iou(&boxes[i].c, &boxes[x].c), ref_iou(&boxes[i].c, &boxes[y].c));
                iy.total_cmp(&ix)
                    .then(boxes[y].score.total_cmp(&boxes[x].score))
                    .then(lex(&boxes[x].c, &boxes[y].c))
            });
            nearest[i][d] = cands.first().copied();
        }
    }
    let det_index = |i: usize| dets.iter().position(|d| *d == boxes[i].detector).unwrap();

    // tuples: (anchor, members sorted by detector)
    let mut tuples: Vec<(usize, Vec<usize>)> = Vec::new();
    for i in 0..n {
        let mut members = vec![i];
        for d in 0..dets.len() {
            if let Some(j) = nearest[i][d] {
                if nearest[j][det_index(i)] == Some(i) {
                    members.push(j);
                }
            }
        }
        members.sort_by_key(|&m| det_index(m));
        tuples.push((i, members));
    }
    let mean = |m: &[usize]| m.iter().map(|&k| boxes[k].score).sum::<f64>() / m.len() as f64;
    let mut prio: Vec<usize> = (0..tuples.len()).collect();
    prio.sort_by(|&a, &b| {
        let (ta, tb) = (&tuples[a], &tuples[b]);
        tb.1.len()
            .cmp(&ta.1.len())
            .then(mean(&tb.1).total_cmp(&mean(&ta.1)))
            .then(lex(&boxes[ta.0].c, &boxes[tb.0].c))
            .then(boxes[tb.0].score.total_cmp(&boxes[ta.0].score))
            .then(boxes[ta.0].detector.cmp(&boxes[tb.0].detector))
    });

    // The greedy pass picks the lexicographically greatest independent set
    // when selections are compared position by position in priority order.
    let t = tuples.len();
    let mut best: Option<Vec<bool>> = None;
    for mask in 0u64..(1u64 << t) {
        let chosen: Vec<bool> = prio.iter().map(|&p| mask & (1 << p) != 0).collect();
        let mut used = vec![false; n];
        let mut ok = true;
        for (pos, &p) in prio.iter().enumerate() {
            if !chosen[pos] {
                continue;
            }
            for &m in &tuples[p].1 {
                if used[m] {
                    ok = false;
                }
                used[m] = true;
            }
        }
        if !ok {
            continue;
        }
        let better = match &best {
            None => true,
            Some(b) => chosen.iter().zip(b).find(|(x, y)| x != y).is_some_and(|(x, _)| *x),
        };
        if better {
            best = Some(chosen);
        }
    }

    let mut merged = Vec::new();
    for (pos, &p) in prio.iter().enumerate() {
        if !best.as_ref().unwrap()[pos] {
            continue;
        }
        let m = &tuples[p].1;
        let k = m.len() as f64;
        let mut c = [0.0; 4];
        let mut s = 0.0;
        for &i in m {
            for (acc, v) in c.iter_mut().zip(&boxes[i].c) {
                *acc += v;
            }
            s += boxes[i].score;
        }
        for v in &mut c {
            *v /= k;
        }
        let count = m.len() as u32;
        let mut score = s / k;
        match policy {
            "reweight" => score = ref_reweight(score, count, beta, n_ref),
            "drop-singletons" if count == 1 => continue,
            _ => {}
        }
        merged.push(RefOut { c, score, n: count });
    }
    ref_nms(merged, thresh)
}

/// AP from its definition: the interpolated precision at recall level `r` is
/// the best precision among all ranking cut-offs whose recall reaches `r`.
/// Recall comparisons are done in integers.
pub fn ref_average_precision(flags: &[bool], num_gt: usize, points: usize) -> f64 {
    if num_gt == 0 {
        return if flags.is_empty() { 1.0 } else { 0.0 };
    }
    let mut cuts = Vec::new(); // (tp, k)
    let mut tp = 0usize;
    for (k, &f) in flags.iter().enumerate() {
        tp += f as usize;
        cuts.push((tp, k + 1));
    }
    let mut total = 0.0;
    for j in 0..points {
        // tp / num_gt >= j / (points - 1)
        let best = cuts
            .iter()
            .filter(|&&(tp, _)| tp * (points - 1) >= j * num_gt)
            .map(|&(tp, k)| tp as f64 / k as f64)
            .fold(0.0f64, f64::max);
        total += best;
    }
    total / points as f64
}

/// One evaluation item for the corpus-level oracle.
#[derive(Debug, Clone)]
pub struct RefDet {
    pub frame: (String, u64),
    pub c: [f64; 4],
    pub score: f64,
}

/// COCO-style mAP over a single category, computed from scratch.
pub fn ref_coco_map(
    dets: &[RefDet],
    gts: &[((String, u64), [f64; 4])],
    thresholds: &[f64],
    points: usize,
) -> f64 {
    let num_gt = gts.len();
    let mut sum = 0.0;
    for &t in thresholds {
        // per-detection flag, keyed by index into dets
        let mut flag = vec![false; dets.len()];
        let mut frames: Vec<&(String, u64)> = dets.iter().map(|d| &d.frame).collect();
        frames.sort();
        frames.dedup();
        for fr in frames {
            let mut di: Vec<usize> = (0..dets.len()).filter(|&i| &dets[i].frame == fr).collect();
            di.sort_by(|&a, &b| {
                dets[b].score.total_cmp(&dets[a].score).then(lex(&dets[a].c, &dets[b].c))
            });
            let mut g: Vec<[f64; 4]> = gts.iter().filter(|(f, _)| f == fr).map(|(_, c)| *c).collect();
            g.sort_by(lex);
            let mut taken = vec![false; g.len()];
            for i in di {
                let mut best: Option<(usize, f64)> = None;
                for (k, gc) in g.iter().enumerate() {
                    let v = ref_iou(&dets[i].c, gc);
                    if !taken[k] && v >= t && best.is_none_or(|(_, bv)| v > bv) {
                        best = Some((k, v));
                    }
                }
                if let Some((k, _)) = best {
                    taken[k] = true;
                    flag[i] = true;
                }
            }
        }
        let mut order: Vec<usize> = (0..dets.len()).collect();
        order.sort_by(|&a, &b| {
            dets[b]
                .score
                .total_cmp(&dets[a].score)
                .then(dets[a].frame.cmp(&dets[b].frame))
                .then(lex(&dets[a].c, &dets[b].c))
        });
        let flags: Vec<bool> = order.iter().map(|&i| flag[i]).collect();
        sum += ref_average_precision(&flags, num_gt, points);
    }
    sum / thresholds.len() as f64
}
