# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled replay loop.

Bit-for-bit twin of the object-level replay in replay.py/policies.py:
every floating-point expression here matches the reference path's
expression shape and evaluation order, and setup.py compiles this
module with FP contraction disabled, so both backends produce identical
doubles. Any change to the decision or pricing arithmetic must be made
in both places; the parity test will catch a mismatch.

Policy codes: 0 ghp, 1 ot, 2 lp. Objective/metric codes: 0 rev, 1 clk,
2 cvn. Goal codes: 0 none, 1 click, 2 conversion.
"""

import numpy as np

from libc.stdint cimport int32_t, int64_t


def replay_kernel(
    int64_t[:] req_start,
    double[:] ts,
    int32_t[:] cand_camp,
    double[:] cand_ctr,
    double[:] cand_cvr,
    double[:] cand_bid,
    double[:] exam,
    double[:] budgets,
    int policy_code,
    int objective_code,
    double[:] alpha,
    double gamma,
    double delta,
    double[:] thresholds,
    int32_t[:] metric,
    int32_t[:] goal_code,
    int P,
    double reserve,
    bint enforce_budgets,
    double[:] spend,
    double[:] rev,
    double[:] clk,
    double[:] cvn,
    double[:, :] buckets,
):
    cdef Py_ssize_t n_req = ts.shape[0]
    cdef Py_ssize_t i, j, p, q, r, s, e, n, m, kc, t, cur, nxt
    cdef Py_ssize_t max_len = 0
    for i in range(n_req):
        if req_start[i + 1] - req_start[i] > max_len:
            max_len = req_start[i + 1] - req_start[i]

    flt_np = np.zeros(max_len if max_len > 0 else 1, dtype=np.int64)
    price_np = np.zeros(max_len if max_len > 0 else 1)
    score_np = np.zeros(max_len if max_len > 0 else 1)
    chosen_np = np.zeros(P + 1, dtype=np.int64)
    top_pos_np = np.zeros(P + 1, dtype=np.int64)
    top_score_np = np.zeros(P + 1)
    cdef int64_t[:] flt = flt_np
    cdef double[:] price = price_np
    cdef double[:] score = score_np
    cdef int64_t[:] chosen = chosen_np
    cdef int64_t[:] top_pos = top_pos_np
    cdef double[:] top_score = top_score_np

    cdef int bucket, k
    cdef double ctr_p, raw, pr, eff, cost, cv, base, sc
    cdef int64_t tmp_i

    for i in range(n_req):
        s = req_start[i]
        e = req_start[i + 1]
        n = e - s
        if n == 0:
            continue
        bucket = <int>(<int64_t>ts[i] // 1800)
        if bucket < 0:
            bucket = 0
        elif bucket >= 48:
            bucket = 47

        kc = 0
        if policy_code == 0:
            # greedy: first P funded ads in landscape order
            for j in range(s, e):
                k = cand_camp[j]
                if spend[k] < budgets[k]:
                    chosen[kc] = j
                    kc += 1
                    if kc == P:
                        break
        elif policy_code == 1:
            # throttling: value at landscape rank vs per-campaign floor
            for p in range(n):
                cur = s + p
                pr = reserve
                if p < n - 1:
                    ctr_p = cand_ctr[cur]
                    if ctr_p > 0.0:
                        raw = cand_bid[cur + 1] * cand_ctr[cur + 1] / ctr_p
                        if raw > reserve:
                            pr = raw
                eff = exam[p] * cand_ctr[cur]
                cost = eff * pr
                cv = eff * cand_cvr[cur]
                k = cand_camp[cur]
                if metric[k] == 1:
                    sc = eff
                elif metric[k] == 2:
                    sc = cv
                else:
                    sc = cost
                score[p] = sc
            for p in range(n):
                cur = s + p
                k = cand_camp[cur]
                if spend[k] < budgets[k] and score[p] >= thresholds[k]:
                    chosen[kc] = cur
                    kc += 1
                    if kc == P:
                        break
        else:
            # dual-guided: filter, price the filtered landscape at its own
            # ranks, score, keep the positive top P
            m = 0
            for j in range(s, e):
                k = cand_camp[j]
                if enforce_budgets:
                    if spend[k] < budgets[k]:
                        flt[m] = j
                        m += 1
                else:
                    if budgets[k] > 0.0:
                        flt[m] = j
                        m += 1
            for p in range(m):
                cur = flt[p]
                pr = reserve
                if p < m - 1:
                    ctr_p = cand_ctr[cur]
                    if ctr_p > 0.0:
                        nxt = flt[p + 1]
                        raw = cand_bid[nxt] * cand_ctr[nxt] / ctr_p
                        if raw > reserve:
                            pr = raw
                price[p] = pr
            for p in range(m):
                cur = flt[p]
                eff = exam[p] * cand_ctr[cur]
                cost = eff * price[p]
                cv = eff * cand_cvr[cur]
                if objective_code == 1:
                    base = eff
                elif objective_code == 2:
                    base = cv
                else:
                    base = cost
                k = cand_camp[cur]
                sc = base - alpha[k] * cost
                if goal_code[k] == 1:
                    sc = sc + gamma * eff
                elif goal_code[k] == 2:
                    sc = sc + delta * cv
                score[p] = sc
            # top-P selection: score descending, earlier rank wins ties
            t = 0
            for p in range(m):
                sc = score[p]
                if sc > 0.0:
                    q = 0
                    while q < t and top_score[q] >= sc:
                        q += 1
                    if q < P:
                        if t < P:
                            t += 1
                        r = t - 1
                        while r > q:
                            top_score[r] = top_score[r - 1]
                            top_pos[r] = top_pos[r - 1]
                            r -= 1
                        top_score[q] = sc
                        top_pos[q] = p
            # emit in landscape order, then fall through to display pricing
            for q in range(t):
                chosen[q] = top_pos[q]
            for q in range(1, t):
                tmp_i = chosen[q]
                r = q
                while r > 0 and chosen[r - 1] > tmp_i:
                    chosen[r] = chosen[r - 1]
                    r -= 1
                chosen[r] = tmp_i
            for q in range(t):
                chosen[q] = flt[chosen[q]]
            kc = t

        # price the chosen ads as a displayed slate (slots 1..kc)
        for p in range(kc):
            cur = chosen[p]
            pr = reserve
            if p < kc - 1:
                ctr_p = cand_ctr[cur]
                if ctr_p > 0.0:
                    nxt = chosen[p + 1]
                    raw = cand_bid[nxt] * cand_ctr[nxt] / ctr_p
                    if raw > reserve:
                        pr = raw
            price[p] = pr
        for p in range(kc):
            cur = chosen[p]
            k = cand_camp[cur]
            eff = exam[p] * cand_ctr[cur]
            cost = eff * price[p]
            cv = eff * cand_cvr[cur]
            spend[k] += cost
            rev[k] += cost
            clk[k] += eff
            cvn[k] += cv
            buckets[bucket, 0] += cost
            buckets[bucket, 1] += eff
            buckets[bucket, 2] += cv
