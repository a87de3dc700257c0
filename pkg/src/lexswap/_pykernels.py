"""Pure-Python versions of the hot string kernels.

These are the reference implementations; ``_ckernels.pyx`` mirrors them
line for line and must return identical results.
"""


def levenshtein(a, b):
    """Unit-cost edit distance between two sequences."""
    n, m = len(a), len(b)
    if n > m:
        a, b = b, a
        n, m = m, n
    if n == 0:
        return m
    previous = list(range(n + 1))
    for i in range(1, m + 1):
        current = [i] + [0] * n
        bi = b[i - 1]
        for j in range(1, n + 1):
            cost = 0 if a[j - 1] == bi else 1
            current[j] = min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + cost)
        previous = current
    return previous[n]


def wordpiece_word(word, token_ids, unk_id, prefix="##", max_chars=100):
    """Greedy longest-match-first segmentation of one word into token ids.

    Returns ``[unk_id]`` if the word is too long or any position cannot be
    matched.
    """
    n = len(word)
    if n > max_chars:
        return [unk_id]
    out = []
    start = 0
    while start < n:
        end = n
        found = -1
        while start < end:
            piece = word[start:end]
            if start > 0:
                piece = prefix + piece
            tid = token_ids.get(piece)
            if tid is not None:
                found = tid
                break
            end -= 1
        if found < 0:
            return [unk_id]
        out.append(found)
        start = end
    return out
