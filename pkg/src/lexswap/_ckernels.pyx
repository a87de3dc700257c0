# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled versions of the kernels in ``_pykernels``."""

from libc.stdlib cimport malloc, free


def levenshtein(a, b):
    cdef Py_ssize_t n = len(a)
    cdef Py_ssize_t m = len(b)
    cdef Py_ssize_t i, j
    cdef long cost, best, sub
    cdef long *prev
    cdef long *cur
    cdef long *tmp
    if n > m:
        a, b = b, a
        n, m = m, n
    if n == 0:
        return m
    # hash each symbol once so the inner loop compares machine words
    cdef Py_ssize_t *ha = <Py_ssize_t *> malloc(n * sizeof(Py_ssize_t))
    cdef Py_ssize_t *hb = <Py_ssize_t *> malloc(m * sizeof(Py_ssize_t))
    prev = <long *> malloc((n + 1) * sizeof(long))
    cur = <long *> malloc((n + 1) * sizeof(long))
    if not ha or not hb or not prev or not cur:
        free(ha); free(hb); free(prev); free(cur)
        raise MemoryError()
    try:
        codes = {}
        for j in range(n):
            ha[j] = codes.setdefault(a[j], len(codes))
        for i in range(m):
            hb[i] = codes.setdefault(b[i], len(codes))
        for j in range(n + 1):
            prev[j] = j
        for i in range(1, m + 1):
            cur[0] = i
            for j in range(1, n + 1):
                cost = 0 if ha[j - 1] == hb[i - 1] else 1
                best = prev[j] + 1
                if cur[j - 1] + 1 < best:
                    best = cur[j - 1] + 1
                sub = prev[j - 1] + cost
                if sub < best:
                    best = sub
                cur[j] = best
            tmp = prev
            prev = cur
            cur = tmp
        return prev[n]
    finally:
        free(ha)
        free(hb)
        free(prev)
        free(cur)


def wordpiece_word(str word, dict token_ids, long unk_id, str prefix="##", long max_chars=100):
    cdef Py_ssize_t n = len(word)
    cdef Py_ssize_t start = 0
    cdef Py_ssize_t end
    cdef list out = []
    cdef object tid
    cdef object found
    if n > max_chars:
        return [unk_id]
    while start < n:
        end = n
        found = None
        while start < end:
            if start > 0:
                tid = token_ids.get(prefix + word[start:end])
            else:
                tid = token_ids.get(word[start:end])
            if tid is not None:
                found = tid
                break
            end -= 1
        if found is None:
            return [unk_id]
        out.append(found)
        start = end
    return out
