//! Maximum-weight matching in general graphs (Edmonds' blossom method,
//! primal-dual formulation).
//!
//! This follows the well-known O(V^3) formulation by Galil (ACM Computing
//! Surveys, 1986), in the variable layout popularized by Joris van Rantwijk's
//! reference implementation. Weights are `i64` so that all dual arithmetic is
//! exact and termination is guaranteed; callers quantize real-valued costs
//! before solving (see `matching::solve_exact`).
//!
//! With `max_cardinality = true` the result is a maximum-weight matching among
//! maximum-cardinality matchings, which on a complete graph with an even
//! number of vertices is a perfect matching.

const SENTINEL: usize = usize::MAX;

/// Labels used by the primal-dual search.
const FREE: u8 = 0;
const LABEL_S: u8 = 1;
const LABEL_T: u8 = 2;
// Breadcrumb marker used while tracing back alternating paths.
const CRUMB: u8 = 5;

pub(crate) struct Blossom {
    nvertex: usize,
    nedge: usize,
    max_cardinality: bool,
    edges: Vec<(usize, usize, i64)>,
    // endpoint[p] is the vertex to which edge endpoint p (= 2k or 2k+1) attaches.
    endpoint: Vec<usize>,
    // neighbend[v]: remote endpoints of edges incident to v.
    neighbend: Vec<Vec<usize>>,
    // mate[v]: remote endpoint of v's matched edge, or SENTINEL.
    mate: Vec<usize>,
    // label[b] for top-level blossoms: FREE, S, or T; CRUMB while scanning.
    label: Vec<u8>,
    // labelend[b]: remote endpoint of the edge through which b got its label.
    labelend: Vec<usize>,
    // inblossom[v]: top-level blossom containing vertex v.
    inblossom: Vec<usize>,
    // blossomparent[b]: immediate parent blossom, or SENTINEL if top-level.
    blossomparent: Vec<usize>,
    // blossomchilds[b]: sub-blossoms, starting at the base and going round.
    blossomchilds: Vec<Vec<usize>>,
    // blossombase[b]: base vertex of (sub-)blossom b.
    blossombase: Vec<usize>,
    // blossomendps[b]: endpoints of the edges connecting consecutive children.
    blossomendps: Vec<Vec<usize>>,
    // bestedge[v or b]: least-slack edge for the delta2/delta3 bookkeeping.
    bestedge: Vec<usize>,
    // blossombestedges[b]: least-slack edges to neighbouring S-blossoms.
    blossombestedges: Vec<Vec<usize>>,
    unusedblossoms: Vec<usize>,
    // dualvar[v] = 2u(v) for vertices; dualvar[b] = z(b) for blossoms.
    dualvar: Vec<i64>,
    // allowedge[k]: edge k is known to have zero slack.
    allowedge: Vec<bool>,
    // Queue of newly discovered S-vertices.
    queue: Vec<usize>,
}

impl Blossom {
    pub(crate) fn new(nvertex: usize, edges: Vec<(usize, usize, i64)>, max_cardinality: bool) -> Self {
        let nedge = edges.len();
        for &(i, j, _) in &edges {
            assert!(i != j && i < nvertex && j < nvertex, "bad edge ({i}, {j})");
        }
        let maxweight = edges.iter().map(|e| e.2).max().unwrap_or(0).max(0);
        let endpoint = (0..2 * nedge)
            .map(|p| if p % 2 == 0 { edges[p / 2].0 } else { edges[p / 2].1 })
            .collect();
        let mut neighbend = vec![Vec::new(); nvertex];
        for (k, &(i, j, _)) in edges.iter().enumerate() {
            neighbend[i].push(2 * k + 1);
            neighbend[j].push(2 * k);
        }
        let mut blossombase: Vec<usize> = (0..nvertex).collect();
        blossombase.extend(std::iter::repeat(SENTINEL).take(nvertex));
        let mut dualvar = vec![maxweight; nvertex];
        dualvar.extend(std::iter::repeat(0).take(nvertex));
        Blossom {
            nvertex,
            nedge,
            max_cardinality,
            edges,
            endpoint,
            neighbend,
            mate: vec![SENTINEL; nvertex],
            label: vec![FREE; 2 * nvertex],
            labelend: vec![SENTINEL; 2 * nvertex],
            inblossom: (0..nvertex).collect(),
            blossomparent: vec![SENTINEL; 2 * nvertex],
            blossomchilds: vec![Vec::new(); 2 * nvertex],
            blossombase,
            blossomendps: vec![Vec::new(); 2 * nvertex],
            bestedge: vec![SENTINEL; 2 * nvertex],
            blossombestedges: vec![Vec::new(); 2 * nvertex],
            unusedblossoms: (nvertex..2 * nvertex).collect(),
            dualvar,
            allowedge: vec![false; nedge],
            queue: Vec::new(),
        }
    }

    // 2 * slack of edge k (not meaningful inside blossoms).
    #[inline]
    fn slack(&self, k: usize) -> i64 {
        let (i, j, wt) = self.edges[k];
        self.dualvar[i] + self.dualvar[j] - 2 * wt
    }

    fn blossom_leaves(&self, b: usize) -> Vec<usize> {
        let mut leaves = Vec::new();
        let mut stack = vec![b];
        while let Some(x) = stack.pop() {
            if x < self.nvertex {
                leaves.push(x);
            } else {
                stack.extend(self.blossomchilds[x].iter().copied());
            }
        }
        leaves
    }

    // Assign label `lbl` to the top-level blossom containing vertex w, reached
    // through the edge with remote endpoint p.
    fn assign_label(&mut self, w: usize, lbl: u8, p: usize) {
        let b = self.inblossom[w];
        assert!(self.label[w] == FREE && self.label[b] == FREE);
        self.label[w] = lbl;
        self.label[b] = lbl;
        self.labelend[w] = p;
        self.labelend[b] = p;
        self.bestedge[w] = SENTINEL;
        self.bestedge[b] = SENTINEL;
        if lbl == LABEL_S {
            let leaves = self.blossom_leaves(b);
            self.queue.extend(leaves);
        } else {
            // A T-blossom's base mate becomes an S-vertex.
            let base = self.blossombase[b];
            let mbase = self.mate[base];
            assert!(mbase != SENTINEL);
            self.assign_label(self.endpoint[mbase], LABEL_S, mbase ^ 1);
        }
    }

    // Trace back from v and w to find either a new blossom's base or an
    // augmenting path (returns SENTINEL for the latter).
    fn scan_blossom(&mut self, v: usize, w: usize) -> usize {
        let mut path = Vec::new();
        let mut base = SENTINEL;
        let (mut v, mut w) = (v, w);
        while v != SENTINEL || w != SENTINEL {
            let mut b = self.inblossom[v];
            if self.label[b] & 4 != 0 {
                base = self.blossombase[b];
                break;
            }
            assert_eq!(self.label[b], LABEL_S);
            path.push(b);
            self.label[b] = CRUMB;
            assert_eq!(self.labelend[b], self.mate[self.blossombase[b]]);
            if self.labelend[b] == SENTINEL {
                // Base of b is single; this path ends here.
                v = SENTINEL;
            } else {
                v = self.endpoint[self.labelend[b]];
                b = self.inblossom[v];
                assert_eq!(self.label[b], LABEL_T);
                assert!(self.labelend[b] != SENTINEL);
                v = self.endpoint[self.labelend[b]];
            }
            if w != SENTINEL {
                std::mem::swap(&mut v, &mut w);
            }
        }
        for b in path {
            self.label[b] = LABEL_S;
        }
        base
    }

    // Construct a new blossom with the given base, containing edge k which
    // joins two S-vertices.
    fn add_blossom(&mut self, base: usize, k: usize) {
        let (mut v, mut w, _) = self.edges[k];
        let bb = self.inblossom[base];
        let mut bv = self.inblossom[v];
        let mut bw = self.inblossom[w];
        let b = self.unusedblossoms.pop().expect("out of blossom slots");
        self.blossombase[b] = base;
        self.blossomparent[b] = SENTINEL;
        self.blossomparent[bb] = b;

        let mut childs = Vec::new();
        let mut endps = Vec::new();
        // Trace from v back to the base.
        while bv != bb {
            self.blossomparent[bv] = b;
            childs.push(bv);
            endps.push(self.labelend[bv]);
            assert!(
                self.label[bv] == LABEL_T
                    || (self.label[bv] == LABEL_S
                        && self.labelend[bv] == self.mate[self.blossombase[bv]])
            );
            assert!(self.labelend[bv] != SENTINEL);
            v = self.endpoint[self.labelend[bv]];
            bv = self.inblossom[v];
        }
        childs.push(bb);
        childs.reverse();
        endps.reverse();
        endps.push(2 * k);
        // Trace from w back to the base.
        while bw != bb {
            self.blossomparent[bw] = b;
            childs.push(bw);
            endps.push(self.labelend[bw] ^ 1);
            assert!(
                self.label[bw] == LABEL_T
                    || (self.label[bw] == LABEL_S
                        && self.labelend[bw] == self.mate[self.blossombase[bw]])
            );
            assert!(self.labelend[bw] != SENTINEL);
            w = self.endpoint[self.labelend[bw]];
            bw = self.inblossom[w];
        }
        self.blossomchilds[b] = childs;
        self.blossomendps[b] = endps;

        assert_eq!(self.label[bb], LABEL_S);
        self.label[b] = LABEL_S;
        self.labelend[b] = self.labelend[bb];
        self.dualvar[b] = 0;

        for v in self.blossom_leaves(b) {
            if self.label[self.inblossom[v]] == LABEL_T {
                // Former T-vertex becomes S inside the new S-blossom.
                self.queue.push(v);
            }
            self.inblossom[v] = b;
        }

        // Compute the least-slack edges from b to every neighbouring S-blossom.
        let mut bestedgeto = vec![SENTINEL; 2 * self.nvertex];
        for bv in self.blossomchilds[b].clone() {
            let nblists: Vec<Vec<usize>> = if self.blossombestedges[bv].is_empty() {
                self.blossom_leaves(bv)
                    .into_iter()
                    .map(|v| self.neighbend[v].iter().map(|p| p / 2).collect())
                    .collect()
            } else {
                vec![self.blossombestedges[bv].clone()]
            };
            for nblist in nblists {
                for k in nblist {
                    let (mut i, mut j, _) = self.edges[k];
                    if self.inblossom[j] == b {
                        std::mem::swap(&mut i, &mut j);
                    }
                    let _ = i;
                    let bj = self.inblossom[j];
                    if bj != b
                        && self.label[bj] == LABEL_S
                        && (bestedgeto[bj] == SENTINEL || self.slack(k) < self.slack(bestedgeto[bj]))
                    {
                        bestedgeto[bj] = k;
                    }
                }
            }
            self.blossombestedges[bv].clear();
            self.bestedge[bv] = SENTINEL;
        }
        self.blossombestedges[b] = bestedgeto.into_iter().filter(|&k| k != SENTINEL).collect();
        self.bestedge[b] = SENTINEL;
        for k in self.blossombestedges[b].clone() {
            if self.bestedge[b] == SENTINEL || self.slack(k) < self.slack(self.bestedge[b]) {
                self.bestedge[b] = k;
            }
        }
    }

    // Expand the given top-level blossom.
    fn expand_blossom(&mut self, b: usize, endstage: bool) {
        for s in self.blossomchilds[b].clone() {
            self.blossomparent[s] = SENTINEL;
            if s < self.nvertex {
                self.inblossom[s] = s;
            } else if endstage && self.dualvar[s] == 0 {
                self.expand_blossom(s, endstage);
            } else {
                for v in self.blossom_leaves(s) {
                    self.inblossom[v] = s;
                }
            }
        }
        // Expanding a T-blossom mid-stage requires relabeling its children.
        if !endstage && self.label[b] == LABEL_T {
            assert!(self.labelend[b] != SENTINEL);
            let entrychild = self.inblossom[self.endpoint[self.labelend[b] ^ 1]];
            let nchilds = self.blossomchilds[b].len() as i64;
            let mut j = self.blossomchilds[b]
                .iter()
                .position(|&c| c == entrychild)
                .unwrap() as i64;
            let (jstep, endptrick): (i64, usize) = if j & 1 != 0 {
                j -= nchilds;
                (1, 0)
            } else {
                (-1, 1)
            };
            // Walk from the entry child down to the base, relabeling.
            let mut p = self.labelend[b];
            while j != 0 {
                self.label[self.endpoint[p ^ 1]] = FREE;
                let endp = self.wrap_endp(b, j - endptrick as i64) ^ endptrick ^ 1;
                self.label[self.endpoint[endp]] = FREE;
                let ep = self.endpoint[p ^ 1];
                self.assign_label(ep, LABEL_T, p);
                let allowed = self.wrap_endp(b, j - endptrick as i64) / 2;
                self.allowedge[allowed] = true;
                j += jstep;
                p = self.wrap_endp(b, j - endptrick as i64) ^ endptrick;
                self.allowedge[p / 2] = true;
                j += jstep;
            }
            // Relabel the base T-sub-blossom without stepping to its mate.
            let bv = self.wrap_child(b, j);
            self.label[self.endpoint[p ^ 1]] = LABEL_T;
            self.label[bv] = LABEL_T;
            self.labelend[self.endpoint[p ^ 1]] = p;
            self.labelend[bv] = p;
            self.bestedge[bv] = SENTINEL;
            // Continue along the blossom until we get back to entrychild.
            j += jstep;
            while self.wrap_child(b, j) != entrychild {
                let bv = self.wrap_child(b, j);
                if self.label[bv] == LABEL_S {
                    j += jstep;
                    continue;
                }
                let mut v = SENTINEL;
                for leaf in self.blossom_leaves(bv) {
                    v = leaf;
                    if self.label[v] != FREE {
                        break;
                    }
                }
                if v != SENTINEL && self.label[v] != FREE {
                    assert_eq!(self.label[v], LABEL_T);
                    assert_eq!(self.inblossom[v], bv);
                    self.label[v] = FREE;
                    self.label[self.endpoint[self.mate[self.blossombase[bv]]]] = FREE;
                    let lblend = self.labelend[v];
                    self.assign_label(v, LABEL_T, lblend);
                }
                j += jstep;
            }
        }
        // Recycle the blossom slot.
        self.label[b] = FREE;
        self.labelend[b] = SENTINEL;
        self.blossombase[b] = SENTINEL;
        self.bestedge[b] = SENTINEL;
        self.blossomchilds[b].clear();
        self.blossomendps[b].clear();
        self.blossombestedges[b].clear();
        self.unusedblossoms.push(b);
    }

    #[inline]
    fn wrap_child(&self, b: usize, j: i64) -> usize {
        let len = self.blossomchilds[b].len() as i64;
        let idx = if j >= 0 { j } else { len + j };
        self.blossomchilds[b][idx as usize]
    }

    #[inline]
    fn wrap_endp(&self, b: usize, j: i64) -> usize {
        let len = self.blossomendps[b].len() as i64;
        let idx = if j >= 0 { j } else { len + j };
        self.blossomendps[b][idx as usize]
    }

    // Swap matched/unmatched edges over an alternating path through blossom b
    // between vertex v and the base vertex.
    fn augment_blossom(&mut self, b: usize, v: usize) {
        // Bubble up through the blossom tree from v to an immediate child of b.
        let mut t = v;
        while self.blossomparent[t] != b {
            t = self.blossomparent[t];
        }
        if t >= self.nvertex {
            self.augment_blossom(t, v);
        }
        let i = self.blossomchilds[b].iter().position(|&c| c == t).unwrap();
        let nchilds = self.blossomchilds[b].len() as i64;
        let mut j = i as i64;
        let (jstep, endptrick): (i64, usize) = if i & 1 != 0 {
            j -= nchilds;
            (1, 0)
        } else {
            (-1, 1)
        };
        while j != 0 {
            j += jstep;
            let t1 = self.wrap_child(b, j);
            let p = self.wrap_endp(b, j - endptrick as i64) ^ endptrick;
            if t1 >= self.nvertex {
                self.augment_blossom(t1, self.endpoint[p]);
            }
            j += jstep;
            let t2 = self.wrap_child(b, j);
            if t2 >= self.nvertex {
                self.augment_blossom(t2, self.endpoint[p ^ 1]);
            }
            self.mate[self.endpoint[p]] = p ^ 1;
            self.mate[self.endpoint[p ^ 1]] = p;
        }
        // Rotate the child list so the new base comes first.
        self.blossomchilds[b].rotate_left(i);
        self.blossomendps[b].rotate_left(i);
        self.blossombase[b] = self.blossombase[self.blossomchilds[b][0]];
        assert_eq!(self.blossombase[b], v);
    }

    // Swap matched/unmatched edges over the augmenting path through edge k.
    fn augment_matching(&mut self, k: usize) {
        let (v, w, _) = self.edges[k];
        for (mut s, mut p) in [(v, 2 * k + 1), (w, 2 * k)] {
            loop {
                let bs = self.inblossom[s];
                assert_eq!(self.label[bs], LABEL_S);
                assert_eq!(self.labelend[bs], self.mate[self.blossombase[bs]]);
                if bs >= self.nvertex {
                    self.augment_blossom(bs, s);
                }
                self.mate[s] = p;
                if self.labelend[bs] == SENTINEL {
                    break; // reached a single vertex
                }
                let t = self.endpoint[self.labelend[bs]];
                let bt = self.inblossom[t];
                assert_eq!(self.label[bt], LABEL_T);
                assert!(self.labelend[bt] != SENTINEL);
                s = self.endpoint[self.labelend[bt]];
                let j = self.endpoint[self.labelend[bt] ^ 1];
                assert_eq!(self.blossombase[bt], t);
                if bt >= self.nvertex {
                    self.augment_blossom(bt, j);
                }
                self.mate[j] = self.labelend[bt];
                p = self.labelend[bt] ^ 1;
            }
        }
    }

    // Check the complementary-slackness certificate of optimality. Exact in
    // integer arithmetic.
    pub(crate) fn verify_optimum(&self) {
        let vdualoffset = if self.max_cardinality {
            (-self.dualvar[..self.nvertex].iter().copied().min().unwrap_or(0)).max(0)
        } else {
            0
        };
        assert!(self.dualvar[..self.nvertex].iter().copied().min().unwrap_or(0) + vdualoffset >= 0);
        assert!(self.dualvar[self.nvertex..].iter().copied().min().unwrap_or(0) >= 0);
        for k in 0..self.nedge {
            let (i, j, _) = self.edges[k];
            let mut s = self.slack(k);
            let mut iblossoms = vec![i];
            let mut jblossoms = vec![j];
            while self.blossomparent[*iblossoms.last().unwrap()] != SENTINEL {
                iblossoms.push(self.blossomparent[*iblossoms.last().unwrap()]);
            }
            while self.blossomparent[*jblossoms.last().unwrap()] != SENTINEL {
                jblossoms.push(self.blossomparent[*jblossoms.last().unwrap()]);
            }
            iblossoms.reverse();
            jblossoms.reverse();
            for (&bi, &bj) in iblossoms.iter().zip(jblossoms.iter()) {
                if bi != bj {
                    break;
                }
                s += 2 * self.dualvar[bi];
            }
            assert!(s >= 0, "edge {k} has negative slack");
            if self.mate[i] / 2 == k || self.mate[j] / 2 == k {
                assert!(self.mate[i] / 2 == k && self.mate[j] / 2 == k);
                assert!(s == 0, "matched edge {k} has nonzero slack");
            }
        }
        for v in 0..self.nvertex {
            assert!(self.mate[v] != SENTINEL || self.dualvar[v] + vdualoffset == 0);
        }
        for b in self.nvertex..2 * self.nvertex {
            if self.blossombase[b] != SENTINEL && self.dualvar[b] > 0 {
                assert!(self.blossomendps[b].len() % 2 == 1);
                for (ix, &p) in self.blossomendps[b].iter().enumerate() {
                    if ix % 2 == 1 {
                        assert!(self.mate[self.endpoint[p]] == p ^ 1);
                        assert!(self.mate[self.endpoint[p ^ 1]] == p);
                    }
                }
            }
        }
    }

    /// Run the solver; returns `mate` where `mate[v]` is the vertex matched to
    /// `v`, or `None` if `v` is single.
    pub(crate) fn solve(mut self) -> Vec<Option<usize>> {
        if self.nedge == 0 {
            return vec![None; self.nvertex];
        }
        for _ in 0..self.nvertex {
            // Stage: find one augmenting path and use it.
            self.label.iter_mut().for_each(|l| *l = FREE);
            self.bestedge.iter_mut().for_each(|e| *e = SENTINEL);
            for be in &mut self.blossombestedges[self.nvertex..] {
                be.clear();
            }
            self.allowedge.iter_mut().for_each(|a| *a = false);
            self.queue.clear();
            for v in 0..self.nvertex {
                if self.mate[v] == SENTINEL && self.label[self.inblossom[v]] == FREE {
                    self.assign_label(v, LABEL_S, SENTINEL);
                }
            }
            let mut augmented = false;
            loop {
                // Substage: BFS until an augmenting path is found, then pump
                // slack out of the dual variables if none was.
                while !self.queue.is_empty() && !augmented {
                    let v = self.queue.pop().unwrap();
                    assert_eq!(self.label[self.inblossom[v]], LABEL_S);
                    for p in self.neighbend[v].clone() {
                        let k = p / 2;
                        let w = self.endpoint[p];
                        if self.inblossom[v] == self.inblossom[w] {
                            continue; // edge internal to a blossom
                        }
                        let mut kslack = 0;
                        if !self.allowedge[k] {
                            kslack = self.slack(k);
                            if kslack <= 0 {
                                self.allowedge[k] = true;
                            }
                        }
                        if self.allowedge[k] {
                            if self.label[self.inblossom[w]] == FREE {
                                self.assign_label(w, LABEL_T, p ^ 1);
                            } else if self.label[self.inblossom[w]] == LABEL_S {
                                let base = self.scan_blossom(v, w);
                                if base != SENTINEL {
                                    self.add_blossom(base, k);
                                } else {
                                    self.augment_matching(k);
                                    augmented = true;
                                    break;
                                }
                            } else if self.label[w] == FREE {
                                assert_eq!(self.label[self.inblossom[w]], LABEL_T);
                                self.label[w] = LABEL_T;
                                self.labelend[w] = p ^ 1;
                            }
                        } else if self.label[self.inblossom[w]] == LABEL_S {
                            let b = self.inblossom[v];
                            if self.bestedge[b] == SENTINEL || kslack < self.slack(self.bestedge[b]) {
                                self.bestedge[b] = k;
                            }
                        } else if self.label[w] == FREE
                            && (self.bestedge[w] == SENTINEL || kslack < self.slack(self.bestedge[w]))
                        {
                            self.bestedge[w] = k;
                        }
                    }
                }
                if augmented {
                    break;
                }

                // No augmenting path: compute the dual adjustment.
                let mut deltatype = -1;
                let mut delta = 0i64;
                let mut deltaedge = 0usize;
                let mut deltablossom = 0usize;
                if !self.max_cardinality {
                    deltatype = 1;
                    delta = self.dualvar[..self.nvertex].iter().copied().min().unwrap().max(0);
                }
                // delta2: least slack between an S-vertex and a free vertex.
                for v in 0..self.nvertex {
                    if self.label[self.inblossom[v]] == FREE && self.bestedge[v] != SENTINEL {
                        let d = self.slack(self.bestedge[v]);
                        if deltatype == -1 || d < delta {
                            delta = d;
                            deltatype = 2;
                            deltaedge = self.bestedge[v];
                        }
                    }
                }
                // delta3: half the least slack between two S-blossoms.
                for b in 0..2 * self.nvertex {
                    if self.blossomparent[b] == SENTINEL
                        && self.label[b] == LABEL_S
                        && self.bestedge[b] != SENTINEL
                    {
                        let d = self.slack(self.bestedge[b]) / 2;
                        if deltatype == -1 || d < delta {
                            delta = d;
                            deltatype = 3;
                            deltaedge = self.bestedge[b];
                        }
                    }
                }
                // delta4: least dual of a top-level T-blossom.
                for b in self.nvertex..2 * self.nvertex {
                    if self.blossombase[b] != SENTINEL
                        && self.blossomparent[b] == SENTINEL
                        && self.label[b] == LABEL_T
                        && (deltatype == -1 || self.dualvar[b] < delta)
                    {
                        delta = self.dualvar[b];
                        deltatype = 4;
                        deltablossom = b;
                    }
                }
                if deltatype == -1 {
                    // Max-cardinality optimum reached; final update so the
                    // optimum is verifiable.
                    assert!(self.max_cardinality);
                    deltatype = 1;
                    delta = self.dualvar[..self.nvertex].iter().copied().min().unwrap().max(0);
                }
                // Apply the adjustment.
                for v in 0..self.nvertex {
                    match self.label[self.inblossom[v]] {
                        FREE => {}
                        LABEL_S => self.dualvar[v] -= delta,
                        LABEL_T => self.dualvar[v] += delta,
                        other => panic!("unexpected label {other}"),
                    }
                }
                for b in self.nvertex..2 * self.nvertex {
                    if self.blossombase[b] != SENTINEL && self.blossomparent[b] == SENTINEL {
                        match self.label[b] {
                            FREE => {}
                            LABEL_S => self.dualvar[b] += delta,
                            LABEL_T => self.dualvar[b] -= delta,
                            other => panic!("unexpected label {other}"),
                        }
                    }
                }
                match deltatype {
                    1 => break, // optimum reached
                    2 => {
                        self.allowedge[deltaedge] = true;
                        let (mut i, j, _) = self.edges[deltaedge];
                        if self.label[self.inblossom[i]] == FREE {
                            i = j;
                        }
                        assert_eq!(self.label[self.inblossom[i]], LABEL_S);
                        self.queue.push(i);
                    }
                    3 => {
                        self.allowedge[deltaedge] = true;
                        let (i, _, _) = self.edges[deltaedge];
                        assert_eq!(self.label[self.inblossom[i]], LABEL_S);
                        self.queue.push(i);
                    }
                    4 => self.expand_blossom(deltablossom, false),
                    other => panic!("unexpected deltatype {other}"),
                }
            }
            if !augmented {
                break;
            }
            // End of stage: expand S-blossoms whose dual fell to zero.
            for b in self.nvertex..2 * self.nvertex {
                if self.blossomparent[b] == SENTINEL
                    && self.blossombase[b] != SENTINEL
                    && self.label[b] == LABEL_S
                    && self.dualvar[b] == 0
                {
                    self.expand_blossom(b, true);
                }
            }
        }
        if cfg!(debug_assertions) {
            self.verify_optimum();
        }
        (0..self.nvertex)
            .map(|v| (self.mate[v] != SENTINEL).then(|| self.endpoint[self.mate[v]]))
            .collect()
    }
}

/// Maximum-weight matching of an undirected graph given as `(i, j, weight)`
/// edges over vertices `0..nvertex`. With `max_cardinality`, only matchings of
/// maximum cardinality are considered.
pub(crate) fn max_weight_matching(
    nvertex: usize,
    edges: Vec<(usize, usize, i64)>,
    max_cardinality: bool,
) -> Vec<Option<usize>> {
    Blossom::new(nvertex, edges, max_cardinality).solve()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mates(nvertex: usize, edges: &[(usize, usize, i64)], maxcard: bool) -> Vec<Option<usize>> {
        max_weight_matching(nvertex, edges.to_vec(), maxcard)
    }

    // The cases below are the classic reference suite exercising blossom
    // creation, relabeling, nested expansion, and the nasty T-expansion paths.

    #[test]
    fn trivial_cases() {
        assert_eq!(mates(0, &[], false), vec![]);
        assert_eq!(mates(2, &[(0, 1, 1)], false), vec![Some(1), Some(0)]);
        assert_eq!(
            mates(4, &[(1, 2, 10), (2, 3, 11)], false),
            vec![None, None, Some(3), Some(2)]
        );
        assert_eq!(
            mates(5, &[(1, 2, 5), (2, 3, 11), (3, 4, 5)], false),
            vec![None, None, Some(3), Some(2), None]
        );
    }

    #[test]
    fn max_cardinality_changes_answer() {
        assert_eq!(
            mates(5, &[(1, 2, 5), (2, 3, 11), (3, 4, 5)], true),
            vec![None, Some(2), Some(1), Some(4), Some(3)]
        );
    }

    #[test]
    fn negative_weights() {
        let edges = [(1, 2, 2), (1, 3, -2), (2, 3, 1), (2, 4, -1), (3, 4, -6)];
        assert_eq!(
            mates(5, &edges, false),
            vec![None, Some(2), Some(1), None, None]
        );
        assert_eq!(
            mates(5, &edges, true),
            vec![None, Some(3), Some(4), Some(1), Some(2)]
        );
    }

    #[test]
    fn s_blossom_augmentation() {
        assert_eq!(
            mates(5, &[(1, 2, 8), (1, 3, 9), (2, 3, 10), (3, 4, 7)], false),
            vec![None, Some(2), Some(1), Some(4), Some(3)]
        );
        assert_eq!(
            mates(
                7,
                &[(1, 2, 8), (1, 3, 9), (2, 3, 10), (3, 4, 7), (1, 6, 5), (4, 5, 6)],
                false
            ),
            vec![None, Some(6), Some(3), Some(2), Some(5), Some(4), Some(1)]
        );
    }

    #[test]
    fn s_to_t_relabel_augmentation() {
        assert_eq!(
            mates(
                7,
                &[(1, 2, 9), (1, 3, 8), (2, 3, 10), (1, 4, 5), (4, 5, 4), (1, 6, 3)],
                false
            ),
            vec![None, Some(6), Some(3), Some(2), Some(5), Some(4), Some(1)]
        );
        assert_eq!(
            mates(
                7,
                &[(1, 2, 9), (1, 3, 8), (2, 3, 10), (1, 4, 5), (4, 5, 3), (1, 6, 4)],
                false
            ),
            vec![None, Some(6), Some(3), Some(2), Some(5), Some(4), Some(1)]
        );
        assert_eq!(
            mates(
                7,
                &[(1, 2, 9), (1, 3, 8), (2, 3, 10), (1, 4, 5), (4, 5, 3), (3, 6, 4)],
                false
            ),
            vec![None, Some(2), Some(1), Some(6), Some(5), Some(4), Some(3)]
        );
    }

    #[test]
    fn nested_s_blossom_augmentation() {
        assert_eq!(
            mates(
                7,
                &[(1, 2, 9), (1, 3, 9), (2, 3, 10), (2, 4, 8), (3, 5, 8), (4, 5, 10), (5, 6, 6)],
                false
            ),
            vec![None, Some(3), Some(4), Some(1), Some(2), Some(6), Some(5)]
        );
    }

    #[test]
    fn s_relabel_nested_s_blossom() {
        assert_eq!(
            mates(
                9,
                &[
                    (1, 2, 10),
                    (1, 7, 10),
                    (2, 3, 12),
                    (3, 4, 20),
                    (3, 5, 20),
                    (4, 5, 25),
                    (5, 6, 10),
                    (6, 7, 10),
                    (7, 8, 8)
                ],
                false
            ),
            vec![None, Some(2), Some(1), Some(4), Some(3), Some(6), Some(5), Some(8), Some(7)]
        );
    }

    #[test]
    fn nested_s_blossom_expand_recursively() {
        assert_eq!(
            mates(
                9,
                &[
                    (1, 2, 8),
                    (1, 3, 8),
                    (2, 3, 10),
                    (2, 4, 12),
                    (3, 5, 12),
                    (4, 5, 14),
                    (4, 6, 12),
                    (5, 7, 12),
                    (6, 7, 14),
                    (7, 8, 12)
                ],
                false
            ),
            vec![None, Some(2), Some(1), Some(5), Some(6), Some(3), Some(4), Some(8), Some(7)]
        );
    }

    #[test]
    fn s_blossom_relabel_t_expand() {
        assert_eq!(
            mates(
                9,
                &[
                    (1, 2, 23),
                    (1, 5, 22),
                    (1, 6, 15),
                    (2, 3, 25),
                    (3, 4, 22),
                    (4, 5, 25),
                    (4, 8, 14),
                    (5, 7, 13)
                ],
                false
            ),
            vec![None, Some(6), Some(3), Some(2), Some(8), Some(7), Some(1), Some(5), Some(4)]
        );
    }

    #[test]
    fn nested_s_blossom_relabel_t_expand() {
        assert_eq!(
            mates(
                9,
                &[
                    (1, 2, 19),
                    (1, 3, 20),
                    (1, 8, 8),
                    (2, 3, 25),
                    (2, 4, 18),
                    (3, 5, 18),
                    (4, 5, 13),
                    (4, 7, 7),
                    (5, 6, 7)
                ],
                false
            ),
            vec![None, Some(8), Some(3), Some(2), Some(7), Some(6), Some(5), Some(4), Some(1)]
        );
    }

    #[test]
    fn tnasty_expand() {
        assert_eq!(
            mates(
                11,
                &[
                    (1, 2, 45),
                    (1, 5, 45),
                    (2, 3, 50),
                    (3, 4, 45),
                    (4, 5, 50),
                    (1, 6, 30),
                    (3, 9, 35),
                    (4, 8, 35),
                    (5, 7, 26),
                    (9, 10, 5)
                ],
                false
            ),
            vec![None, Some(6), Some(3), Some(2), Some(8), Some(7), Some(1), Some(5), Some(4), Some(10), Some(9)]
        );
    }

    #[test]
    fn tnasty2_expand() {
        assert_eq!(
            mates(
                11,
                &[
                    (1, 2, 45),
                    (1, 5, 45),
                    (2, 3, 50),
                    (3, 4, 45),
                    (4, 5, 50),
                    (1, 6, 30),
                    (3, 9, 35),
                    (4, 8, 26),
                    (5, 7, 40),
                    (9, 10, 5)
                ],
                false
            ),
            vec![None, Some(6), Some(3), Some(2), Some(8), Some(7), Some(1), Some(5), Some(4), Some(10), Some(9)]
        );
    }

    #[test]
    fn t_expand_least_slack() {
        assert_eq!(
            mates(
                11,
                &[
                    (1, 2, 45),
                    (1, 5, 45),
                    (2, 3, 50),
                    (3, 4, 45),
                    (4, 5, 50),
                    (1, 6, 30),
                    (3, 9, 35),
                    (4, 8, 28),
                    (5, 7, 26),
                    (9, 10, 5)
                ],
                false
            ),
            vec![None, Some(6), Some(3), Some(2), Some(8), Some(7), Some(1), Some(5), Some(4), Some(10), Some(9)]
        );
    }

    #[test]
    fn nested_tnasty_expand() {
        assert_eq!(
            mates(
                13,
                &[
                    (1, 2, 45),
                    (1, 7, 45),
                    (2, 3, 50),
                    (3, 4, 45),
                    (4, 5, 95),
                    (4, 6, 94),
                    (5, 6, 94),
                    (6, 7, 50),
                    (1, 8, 30),
                    (3, 11, 35),
                    (5, 9, 36),
                    (7, 10, 26),
                    (11, 12, 5)
                ],
                false
            ),
            vec![
                None,
                Some(8),
                Some(3),
                Some(2),
                Some(6),
                Some(9),
                Some(4),
                Some(10),
                Some(1),
                Some(5),
                Some(7),
                Some(12),
                Some(11)
            ]
        );
    }

    #[test]
    fn nested_relabel_expand() {
        assert_eq!(
            mates(
                11,
                &[
                    (1, 2, 40),
                    (1, 3, 40),
                    (2, 3, 60),
                    (2, 4, 55),
                    (3, 5, 55),
                    (4, 5, 50),
                    (1, 8, 15),
                    (5, 7, 30),
                    (7, 6, 10),
                    (8, 10, 10),
                    (4, 9, 30)
                ],
                false
            ),
            vec![None, Some(2), Some(1), Some(5), Some(9), Some(3), Some(7), Some(6), Some(10), Some(4), Some(8)]
        );
    }
}
