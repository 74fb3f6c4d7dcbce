# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
# distutils: language = c++
"""Accelerated trial loop: a draw-for-draw mirror of the pure engine.

Restricted to the non-adversarial regime (the adversaries stay Python
objects).  Everything order-sensitive is copied from the reference
implementation line by line: the Fenwick tree including its growth
schedule, the chooser's skip rules for degenerate decisions, traversal
order inside every mechanism, and the sorted application of marks.
Attachment weights are produced by calling the Python attachment object
and caching per degree, so both backends share the exact float values.
Trajectory equality against the pure engine is asserted in the tests.
"""

from libcpp.vector cimport vector
from libcpp.algorithm cimport sort as cpp_sort
from cpython.pycapsule cimport PyCapsule_GetPointer

from numpy.random cimport bitgen_t
from numpy.random import PCG64

from .attachment import AllWeightsZero
from .evolution import AuditViolation
from .state import CkpState, StateError
from . import state as state_mod

KERNEL_READY = True

cdef int CT = state_mod.CT
cdef int CF = state_mod.CF
cdef int PF = state_mod.PF

cdef int M_STRINGY = 0
cdef int M_BFS = 1
cdef int M_EXHAUSTIVE = 2
cdef int M_PARENTWISE = 3
cdef int M_COMPLETE = 4

MECHANISM_CODES = {
    "stringy": M_STRINGY,
    "bfs": M_BFS,
    "exhaustive-bfs": M_EXHAUSTIVE,
    "parentwise-bfs": M_PARENTWISE,
    "complete": M_COMPLETE,
}


cdef class KernelEngine:
    """One trajectory's worth of mutable state, all in C++ containers."""

    # randomness
    cdef bitgen_t *rng
    cdef object _bitgen_keepalive
    # features
    cdef object attach
    cdef double check_rate, error_rate, detection_rate
    cdef int check_depth, mech, path_only, simple, m_max
    cdef vector[int] law_support
    cdef vector[double] law_cum
    # attachment values by degree, produced by the Python object
    cdef vector[double] atab
    # state columns
    cdef vector[int] labels
    cdef vector[int] isfalse
    cdef vector[int] birth
    cdef vector[int] advers
    cdef vector[vector[int]] parents
    cdef vector[vector[int]] children
    cdef vector[int] deg_pt
    cdef vector[int] deg_ct
    cdef vector[int] pf_parent
    cdef int pf_total
    # weight index (verbatim Fenwick mirror)
    cdef int wsize, wcap, wpositive
    cdef double wtotal
    cdef vector[double] tree
    cdef vector[double] weights
    # engine counters
    cdef int stopped, step_index, pt_false, pf_count, f_count, l_count
    cdef long zero_since          # -1 encodes "currently nonzero"
    cdef vector[int] f_mem
    cdef vector[int] l_mem
    cdef vector[int] pf_child_len  # -1 while the node is PT
    # traversal scratch: stamp arrays sized with the node count
    cdef vector[int] seen_at
    cdef vector[int] depth_of
    cdef vector[int] prev_of
    cdef vector[int] closed_at
    cdef vector[int] marked_at
    cdef int seen_stamp, closed_stamp, marked_stamp
    cdef vector[int] queue_buf, order_buf, ball_marked, step_marked
    cdef vector[int] founds_buf, touch_buf, affect_buf, walk_buf
    # cheap audit
    cdef int audit_on, track_delta, last_potential, fixed_floor

    def __init__(self, features, init_state, seed, audit_cheap=False):
        if features.adversary_rate != 0:
            raise ValueError("the compiled engine has no adversary support")
        bg = PCG64(seed)
        self._bitgen_keepalive = bg
        self.rng = <bitgen_t *> PyCapsule_GetPointer(bg.capsule,
                                                     "BitGenerator")
        self.attach = features.attach
        self.check_rate = features.check_rate
        self.error_rate = features.error_rate
        self.detection_rate = features.detection_rate
        self.check_depth = features.check_depth
        self.path_only = 1 if features.path_only_marking else 0
        self.simple = 1 if features.simple else 0
        self.mech = MECHANISM_CODES[features.mechanism]
        law = features.parent_count
        for m in law.support:
            self.law_support.push_back(m)
        for c in law.cum:
            self.law_cum.push_back(c)
        self.m_max = law.max

        cdef int n = len(init_state.labels)
        cdef int v, u
        # conditional expressions must land in a typed local before they
        # reach push_back; feeding them to the reference parameter directly
        # makes the generated C++ bind a reference to a dead temporary
        cdef int flag
        for v in range(n):
            self.labels.push_back(init_state.labels[v])
            flag = 1 if init_state.is_false[v] else 0
            self.isfalse.push_back(flag)
            self.birth.push_back(init_state.birth[v])
            flag = 1 if init_state.adversarial[v] else 0
            self.advers.push_back(flag)
            self.parents.push_back(vector[int]())
            for u in init_state.parents[v]:
                self.parents[v].push_back(u)
            self.children.push_back(vector[int]())
            for u in init_state.children[v]:
                self.children[v].push_back(u)
            self.deg_pt.push_back(init_state.deg_pt[v])
            self.deg_ct.push_back(init_state.deg_ct[v])
            self.pf_parent.push_back(init_state.pf_parent_edges[v])
        self.pf_total = init_state.pf_total

        # the weight index construction mirrors weight_index_for: initial
        # capacity max(1024, n), one append per node in id order
        self.wsize = 0
        self.wcap = max(1024, n)
        self.wtotal = 0.0
        self.wpositive = 0
        self.tree.assign(self.wcap + 1, 0.0)
        self.weights.assign(self.wcap, 0.0)
        for v in range(n):
            if self.labels[v] == PF:
                self.w_append(0.0)
            else:
                self.w_append(self.aval(self.deg_pt[v]))

        self.stopped = 0
        self.step_index = 0
        self.pt_false = 0
        self.f_count = 0
        self.l_count = 0
        for v in range(n):
            if self.labels[v] != PF and self.isfalse[v]:
                self.pt_false += 1
            self.f_mem.push_back(self.is_minimal_false(v))
            self.l_mem.push_back(self.is_leaf(v))
            self.f_count += self.f_mem[v]
            self.l_count += self.l_mem[v]
            self.pf_child_len.push_back(
                <int> self.children[v].size() if self.labels[v] == PF else -1)
        self.pf_count = self.pf_total
        self.zero_since = 0 if self.pt_false == 0 else -1

        self.seen_at.assign(n, 0)
        self.depth_of.assign(n, 0)
        self.prev_of.assign(n, 0)
        self.closed_at.assign(n, 0)
        self.marked_at.assign(n, 0)
        self.seen_stamp = 0
        self.closed_stamp = 0
        self.marked_stamp = 0

        self.audit_on = 1 if audit_cheap else 0
        self.track_delta = 1 if self.detection_rate == 1 else 0
        self.last_potential = self.f_count + self.l_count
        if self.mech == M_STRINGY:
            self.fixed_floor = 2 if self.m_max == 1 \
                else self.check_depth + 1 + self.m_max
        elif self.mech == M_BFS or self.mech == M_EXHAUSTIVE:
            self.fixed_floor = 1 + self.m_max
        elif self.mech == M_PARENTWISE:
            self.fixed_floor = 2 * self.m_max
        else:
            self.fixed_floor = 0
        if features.adversary_budget > self.fixed_floor:
            self.fixed_floor = features.adversary_budget

    # -- randomness, mirroring SimChooser ---------------------------------

    cdef inline double draw(self):
        return self.rng.next_double(self.rng.state)

    cdef inline int maybe(self, double p):
        if p <= 0:
            return 0
        if p >= 1:
            return 1
        return self.draw() < p

    cdef inline int uniform_index(self, int n):
        if n == 1:
            return 0
        cdef int i = <int> (self.draw() * n)
        return n - 1 if i >= n else i

    cdef inline int pmf_index(self):
        cdef int n = <int> self.law_cum.size()
        if n == 1:
            return 0
        cdef double x = self.draw()
        cdef int i
        for i in range(n):
            if x < self.law_cum[i]:
                return i
        return n - 1

    # -- attachment values -------------------------------------------------

    cdef double aval(self, int d) except? -1.0:
        while d >= <int> self.atab.size():
            self.atab.push_back(
                float(self.attach.evaluate(<int> self.atab.size())))
        return self.atab[d]

    # -- weight index, mirroring WeightIndex -------------------------------

    cdef void w_grow(self, int need) except *:
        cdef int cap = self.wcap
        while cap < need:
            cap *= 2
        cdef vector[double] old
        cdef int i
        for i in range(self.wsize):
            old.push_back(self.weights[i])
        self.wcap = cap
        self.tree.assign(cap + 1, 0.0)
        self.weights.assign(cap, 0.0)
        self.wsize = 0
        self.wtotal = 0.0
        self.wpositive = 0
        for i in range(<int> old.size()):
            self.w_append(old[i])

    cdef int w_append(self, double weight) except -1:
        if self.wsize >= self.wcap:
            self.w_grow(self.wsize + 1)
        cdef int i = self.wsize
        self.wsize += 1
        if weight != 0.0:
            self.w_add(i, weight)
            self.weights[i] = weight
            self.wtotal += weight
            if weight > 0:
                self.wpositive += 1
        return i

    cdef void w_set(self, int i, double weight):
        cdef double old = self.weights[i]
        if weight == old:
            return
        cdef double delta = weight - old
        self.w_add(i, delta)
        self.weights[i] = weight
        self.wtotal += delta
        if (old > 0) != (weight > 0):
            self.wpositive += 1 if weight > 0 else -1

    cdef void w_add(self, int i, double delta):
        cdef int j = i + 1
        while j <= self.wcap:
            self.tree[j] += delta
            j += j & (-j)

    cdef int w_select(self, double x) except -1:
        cdef int pos = 0
        cdef int mask = 1
        while mask * 2 <= self.wcap:
            mask *= 2
        cdef double rem = x
        cdef int nxt
        while mask:
            nxt = pos + mask
            if nxt <= self.wcap and self.tree[nxt] <= rem:
                pos = nxt
                rem -= self.tree[nxt]
            mask >>= 1
        if pos >= self.wsize:
            pos = self.wsize - 1
        cdef int j
        if self.weights[pos] <= 0:
            j = pos + 1
            while j < self.wsize and self.weights[j] <= 0:
                j += 1
            if j >= self.wsize:
                j = pos - 1
                while j >= 0 and self.weights[j] <= 0:
                    j -= 1
            if j < 0:
                raise AllWeightsZero(
                    "no positive attachment weight to select")
            pos = j
        return pos

    # -- membership predicates --------------------------------------------

    cdef inline int is_minimal_false(self, int v):
        cdef int lab = self.labels[v]
        if lab == CF:
            return 1
        return 1 if (lab == CT and self.pf_parent[v] > 0) else 0

    cdef inline int is_leaf(self, int v):
        if self.labels[v] != CT or self.pf_parent[v] > 0:
            return 0
        if self.simple:
            return 1 if self.children[v].size() == 0 else 0
        return 1 if self.deg_ct[v] == 0 else 0

    cdef void refresh_membership(self, int v):
        cdef int f_now = self.is_minimal_false(v)
        cdef int l_now = self.is_leaf(v)
        if f_now != self.f_mem[v]:
            self.f_mem[v] = f_now
            self.f_count += 1 if f_now else -1
        if l_now != self.l_mem[v]:
            self.l_mem[v] = l_now
            self.l_count += 1 if l_now else -1

    # -- growth ------------------------------------------------------------

    cdef int add_node(self, vector[int]& parent_ids, int label) except -1:
        """Append one node (non-adversarial) and update every index the
        pure engine updates, in the same order."""
        cdef int v = <int> self.labels.size()
        cdef int false = 1 if label == CF else 0
        cdef size_t idx
        cdef int u
        if not false:
            for idx in range(parent_ids.size()):
                if self.isfalse[parent_ids[idx]]:
                    false = 1
                    break
        self.labels.push_back(label)
        self.isfalse.push_back(false)
        self.birth.push_back(self.step_index)
        self.advers.push_back(0)
        self.parents.push_back(parent_ids)
        self.children.push_back(vector[int]())
        self.deg_pt.push_back(0)
        self.deg_ct.push_back(0)
        self.pf_parent.push_back(0)
        for idx in range(parent_ids.size()):
            u = parent_ids[idx]
            self.children[u].push_back(v)
            self.deg_pt[u] += 1
            if label == CT:
                self.deg_ct[u] += 1
        # engine-level bookkeeping
        self.w_append(self.aval(0))
        self.touch_buf = parent_ids
        cpp_sort(self.touch_buf.begin(), self.touch_buf.end())
        cdef int last = -1
        for idx in range(self.touch_buf.size()):
            u = self.touch_buf[idx]
            if u == last:
                continue
            last = u
            self.w_set(u, self.aval(self.deg_pt[u]))
        self.f_mem.push_back(self.is_minimal_false(v))
        self.l_mem.push_back(self.is_leaf(v))
        self.f_count += self.f_mem[v]
        self.l_count += self.l_mem[v]
        if false:
            self.pt_false += 1
        self.pf_child_len.push_back(-1)
        last = -1
        for idx in range(self.touch_buf.size()):
            u = self.touch_buf[idx]
            if u == last:
                continue
            last = u
            self.refresh_membership(u)
        # grow the stamp arrays alongside
        self.seen_at.push_back(0)
        self.depth_of.push_back(0)
        self.prev_of.push_back(0)
        self.closed_at.push_back(0)
        self.marked_at.push_back(0)
        return v

    cdef void apply_marks(self) except *:
        """Mark everything in step_marked PF; mirrors _apply_marks plus
        CkpState.mark_pf with the same sorted iteration."""
        cpp_sort(self.step_marked.begin(), self.step_marked.end())
        cdef size_t i, j
        cdef int w, u, was_ct
        for i in range(self.step_marked.size()):
            w = self.step_marked[i]
            if not self.isfalse[w]:
                raise AuditViolation(
                    f"check tried to mark True node {w}")
        for i in range(self.step_marked.size()):
            w = self.step_marked[i]
            if self.labels[w] == PF:
                raise StateError(f"node {w} is already PF")
            if not self.isfalse[w]:
                raise StateError(f"refusing to mark hidden-True node {w} PF")
        # state mutation, collecting degree-touched parents
        self.touch_buf.clear()
        for i in range(self.step_marked.size()):
            w = self.step_marked[i]
            was_ct = self.labels[w] == CT
            self.labels[w] = PF
            for j in range(self.parents[w].size()):
                u = self.parents[w][j]
                self.deg_pt[u] -= 1
                if was_ct:
                    self.deg_ct[u] -= 1
                self.touch_buf.push_back(u)
            for j in range(self.children[w].size()):
                self.pf_parent[self.children[w][j]] += 1
        self.pf_total += <int> self.step_marked.size()
        # weight zeroing for marked, then refreshed parents, sorted
        self.affect_buf.clear()
        for i in range(self.step_marked.size()):
            w = self.step_marked[i]
            self.w_set(w, 0.0)
            self.pf_child_len[w] = <int> self.children[w].size()
            for j in range(self.children[w].size()):
                self.affect_buf.push_back(self.children[w][j])
            for j in range(self.parents[w].size()):
                self.affect_buf.push_back(self.parents[w][j])
        cpp_sort(self.touch_buf.begin(), self.touch_buf.end())
        cdef int last = -1
        for i in range(self.touch_buf.size()):
            u = self.touch_buf[i]
            if u == last:
                continue
            last = u
            if self.labels[u] != PF:
                self.w_set(u, self.aval(self.deg_pt[u]))
        self.pt_false -= <int> self.step_marked.size()
        self.pf_count += <int> self.step_marked.size()
        for i in range(self.step_marked.size()):
            w = self.step_marked[i]
            if self.f_mem[w]:
                self.f_mem[w] = 0
                self.f_count -= 1
            if self.l_mem[w]:
                self.l_mem[w] = 0
                self.l_count -= 1
        cpp_sort(self.affect_buf.begin(), self.affect_buf.end())
        last = -1
        for i in range(self.affect_buf.size()):
            u = self.affect_buf[i]
            if u == last:
                continue
            last = u
            if self.marked_at[u] == self.marked_stamp:
                continue
            self.refresh_membership(u)

    # -- checking mechanisms ----------------------------------------------

    cdef inline int flagged(self, int u):
        cdef int hit = 0
        if self.labels[u] == CF:
            hit = self.maybe(self.detection_rate)
        return hit or self.pf_parent[u] > 0

    cdef void mark_node(self, int w):
        if self.marked_at[w] != self.marked_stamp:
            self.marked_at[w] = self.marked_stamp
            self.step_marked.push_back(w)

    cdef void close_descendants(self, int found):
        """Stamp ``found`` plus every order_buf node below it (closure
        over edges inside the stamped set), then mark the stamped part of
        order_buf.  Mirrors _descendants_within."""
        self.closed_stamp += 1
        cdef int cs = self.closed_stamp
        self.closed_at[found] = cs
        cdef int grew = 1
        cdef size_t i, j
        cdef int x
        while grew:
            grew = 0
            for i in range(self.order_buf.size()):
                x = self.order_buf[i]
                if self.closed_at[x] == cs:
                    continue
                for j in range(self.parents[x].size()):
                    if self.closed_at[self.parents[x][j]] == cs:
                        self.closed_at[x] = cs
                        grew = 1
                        break
        self.mark_node(found)
        for i in range(self.order_buf.size()):
            x = self.order_buf[i]
            if self.closed_at[x] == cs:
                self.mark_node(x)

    cdef void mark_prev_path(self, int found):
        cdef int node = found
        self.mark_node(node)
        while self.prev_of[node] != -1:
            node = self.prev_of[node]
            self.mark_node(node)

    cdef void check_stringy(self, int v) except *:
        cdef int current = v
        cdef int steps, target, nedges
        self.walk_buf.clear()
        self.walk_buf.push_back(v)
        if self.labels[v] == CF and self.maybe(self.detection_rate):
            self.mark_node(v)
            return
        cdef size_t i
        for steps in range(self.check_depth):
            nedges = <int> self.parents[current].size()
            if nedges == 0:
                break
            target = self.parents[current][self.uniform_index(nedges)]
            if self.labels[target] == PF:
                for i in range(self.walk_buf.size()):
                    self.mark_node(self.walk_buf[i])
                return
            self.walk_buf.push_back(target)
            current = target
            if self.labels[target] == CF and self.maybe(self.detection_rate):
                for i in range(self.walk_buf.size()):
                    self.mark_node(self.walk_buf[i])
                return

    cdef int ball_first(self, int start, int cap) except? -2:
        """BFS from ``start`` to depth ``cap`` stopping at the first
        recognized node; on a find, marks it (with visited descendants or
        the discovery path).  Returns the find or -1."""
        if cap < 0 or self.labels[start] == PF:
            return -1
        self.seen_stamp += 1
        cdef int ss = self.seen_stamp
        self.order_buf.clear()
        self.queue_buf.clear()
        self.seen_at[start] = ss
        self.depth_of[start] = 0
        self.prev_of[start] = -1
        self.queue_buf.push_back(start)
        cdef size_t head = 0, j
        cdef int u, w
        while head < self.queue_buf.size():
            u = self.queue_buf[head]
            head += 1
            self.order_buf.push_back(u)
            if self.flagged(u):
                if self.path_only:
                    self.mark_prev_path(u)
                else:
                    self.close_descendants(u)
                return u
            if self.depth_of[u] < cap:
                for j in range(self.parents[u].size()):
                    w = self.parents[u][j]
                    if self.seen_at[w] == ss or self.labels[w] == PF:
                        continue
                    self.seen_at[w] = ss
                    self.depth_of[w] = self.depth_of[u] + 1
                    self.prev_of[w] = u
                    self.queue_buf.push_back(w)
        return -1

    cdef int ball_all(self, int start, int cap) except? -2:
        """Sweep the whole radius-``cap`` ball, not expanding through
        recognized nodes; marks every find with its visited descendants.
        Returns the number of finds."""
        if cap < 0 or self.labels[start] == PF:
            return 0
        self.seen_stamp += 1
        cdef int ss = self.seen_stamp
        self.order_buf.clear()
        self.queue_buf.clear()
        self.founds_buf.clear()
        self.seen_at[start] = ss
        self.depth_of[start] = 0
        self.queue_buf.push_back(start)
        cdef size_t head = 0, j
        cdef int u, w
        while head < self.queue_buf.size():
            u = self.queue_buf[head]
            head += 1
            self.order_buf.push_back(u)
            if self.flagged(u):
                self.founds_buf.push_back(u)
                continue
            if self.depth_of[u] < cap:
                for j in range(self.parents[u].size()):
                    w = self.parents[u][j]
                    if self.seen_at[w] == ss or self.labels[w] == PF:
                        continue
                    self.seen_at[w] = ss
                    self.depth_of[w] = self.depth_of[u] + 1
                    self.queue_buf.push_back(w)
        for j in range(self.founds_buf.size()):
            self.close_descendants(self.founds_buf[j])
        return <int> self.founds_buf.size()

    cdef void run_check(self, int v, vector[int]& parent_edges) except *:
        """Fill step_marked for this step's check.  Decision stream is
        identical to checking.run_check with the same features."""
        self.marked_stamp += 1
        self.step_marked.clear()
        cdef int mech = self.mech
        cdef size_t e
        cdef int u, found, nfound
        if mech == M_STRINGY or mech == M_BFS:
            if not self.maybe(self.check_rate):
                return
            if mech == M_STRINGY:
                self.check_stringy(v)
            else:
                self.ball_first(v, self.check_depth)
            return
        for e in range(parent_edges.size()):
            u = parent_edges[e]
            if not self.maybe(self.check_rate):
                continue
            if mech == M_EXHAUSTIVE:
                if self.labels[v] == CF and self.maybe(self.detection_rate):
                    self.mark_node(v)
                    return
                found = self.ball_first(u, self.check_depth - 1)
                if found != -1:
                    self.mark_node(v)
                    return
            elif mech == M_PARENTWISE:
                if self.labels[v] == CF and self.maybe(self.detection_rate):
                    self.mark_node(v)
                    continue
                found = self.ball_first(u, self.check_depth - 1)
                if found != -1:
                    self.mark_node(v)
            else:
                if self.labels[v] == CF and self.maybe(self.detection_rate):
                    self.mark_node(v)
                nfound = self.ball_all(u, self.check_depth - 1)
                if nfound > 0:
                    self.mark_node(v)

    # -- dynamics ----------------------------------------------------------

    cdef int step_c(self) except -1:
        """One growth attempt.  Returns 1 when the process stopped."""
        if self.stopped:
            return 1
        self.step_index += 1
        if self.wpositive == 0:
            self.stopped = 1
            return 1
        cdef int m = self.law_support[self.pmf_index()]
        cdef vector[int] parent_ids
        cdef int i
        for i in range(m):
            parent_ids.push_back(self.w_select(self.draw() * self.wtotal))
        cdef int label = CF if self.maybe(self.error_rate) else CT
        cdef int v = self.add_node(parent_ids, label)
        self.run_check(v, parent_ids)
        if self.step_marked.size() > 0:
            self.apply_marks()
        if self.pt_false == 0:
            if self.zero_since == -1:
                self.zero_since = self.step_index
        else:
            self.zero_since = -1
        if self.audit_on:
            self.cheap_audit()
        return 0

    cdef void cheap_audit(self) except *:
        cdef int now, floor
        if self.track_delta:
            now = self.f_count + self.l_count
            floor = self.fixed_floor
            if self.mech == M_COMPLETE:
                if <int> self.step_marked.size() + self.m_max + 1 > floor:
                    floor = <int> self.step_marked.size() + self.m_max + 1
            if now - self.last_potential < -floor:
                raise AuditViolation(
                    f"survival potential fell by "
                    f"{self.last_potential - now} in one step, cap {floor}")
            self.last_potential = now
        cdef size_t i
        for i in range(self.step_marked.size()):
            if self.labels[self.step_marked[i]] != PF:
                raise AuditViolation(
                    f"marked node {self.step_marked[i]} is not PF")

    # -- python-facing API -------------------------------------------------

    def counts(self):
        cdef int n = <int> self.labels.size()
        return {
            "nodes": n,
            "pt": n - self.pf_count,
            "pt_false": self.pt_false,
            "pf": self.pf_count,
            "minimal_false": self.f_count,
            "leaves": self.l_count,
        }

    def run(self, int horizon, checkpoint_steps=()):
        """Run up to ``horizon`` steps with the pure engine's early-exit
        rule; returns the summary dict run_python_trial would produce."""
        pending = sorted(set(checkpoint_steps))
        checkpoints = []
        while pending and pending[0] <= 0:
            checkpoints.append((pending.pop(0), self.counts()))
        cdef int t
        cdef int stopped_now
        for t in range(1, horizon + 1):
            stopped_now = self.step_c()
            while pending and pending[0] <= t:
                checkpoints.append((pending.pop(0), self.counts()))
            if stopped_now:
                break
            if self.pt_false == 0 and self.simple:
                break
        for step in pending:
            checkpoints.append((step, self.counts()))
        eliminated = None
        if self.pt_false == 0:
            eliminated = self.zero_since
        stopped_at = None
        if self.stopped:
            stopped_at = self.step_index
        return {
            "survived_at_horizon": self.pt_false > 0,
            "eliminated_at": eliminated,
            "stopped_at": stopped_at,
            "pf_exists": self.pf_count > 0,
            "final_counts": self.counts(),
            "checkpoints": checkpoints,
        }

    def export_state(self):
        """Rebuild a CkpState plus the engine-side bookkeeping, for deep
        audits and parity checks."""
        cdef int n = <int> self.labels.size()
        cdef int v
        cdef size_t j
        st = CkpState()
        for v in range(n):
            st.labels.append(self.labels[v])
            st.is_false.append(bool(self.isfalse[v]))
            st.birth.append(self.birth[v])
            st.adversarial.append(bool(self.advers[v]))
            st.parents.append(
                [self.parents[v][j] for j in range(self.parents[v].size())])
            st.children.append(
                [self.children[v][j]
                 for j in range(self.children[v].size())])
            st.deg_pt.append(self.deg_pt[v])
            st.deg_ct.append(self.deg_ct[v])
            st.pf_parent_edges.append(self.pf_parent[v])
        st.pf_total = self.pf_total
        return st

    def export_bookkeeping(self):
        cdef int n = <int> self.labels.size()
        cdef int v
        zero_since = None
        if self.zero_since != -1:
            zero_since = self.zero_since
        return {
            "weights": [self.weights[v] for v in range(self.wsize)],
            "weight_total": self.wtotal,
            "weight_positive": self.wpositive,
            "pt_false": self.pt_false,
            "pf_count": self.pf_count,
            "f_count": self.f_count,
            "l_count": self.l_count,
            "f_mem": [self.f_mem[v] for v in range(n)],
            "l_mem": [self.l_mem[v] for v in range(n)],
            "zero_since": zero_since,
            "stopped": bool(self.stopped),
            "step_index": self.step_index,
            "pf_child_len": {v: self.pf_child_len[v] for v in range(n)
                             if self.pf_child_len[v] >= 0},
        }
