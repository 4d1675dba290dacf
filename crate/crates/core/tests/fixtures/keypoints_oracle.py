"""1-based transcription of the key-point selection loop. The farthest-point
search skips the last key point itself so that indices strictly increase.

Writes <name>_path.txt (global trajectory format) and <name>_keys.txt
(0-based source indices, one per line) for the golden tests.
"""
import math
import os

DELTA_THETA = math.radians(15.0)
C = 20
N_S1 = 5


def sub(a, b):
    return [a[0] - b[0], a[1] - b[1], a[2] - b[2]]


def norm(a):
    return math.sqrt(a[0] ** 2 + a[1] ** 2 + a[2] ** 2)


def angle(a, b):
    na, nb = norm(a), norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    c = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]) / (na * nb)
    return math.acos(max(-1.0, min(1.0, c)))


def dist_to_line(p, a, b):
    ab = sub(b, a)
    ap = sub(p, a)
    L = norm(ab)
    if L == 0.0:
        return norm(ap)
    cx = [ap[1] * ab[2] - ap[2] * ab[1], ap[2] * ab[0] - ap[0] * ab[2], ap[0] * ab[1] - ap[1] * ab[0]]
    return norm(cx) / L


def select(p):
    J = len(p)
    P = lambda j: p[j - 1]
    keys = [1, N_S1]
    j, c, m = N_S1, 0, 2
    while j < J:
        j, c = j + 1, c + 1
        pm, pm1 = P(keys[m - 1]), P(keys[m - 2])
        if angle(sub(pm, pm1), sub(P(j), pm)) > DELTA_THETA:
            h, best = keys[m - 1] + 1, -1.0
            for i in range(keys[m - 1] + 1, j + 1):
                d = dist_to_line(P(i), pm, P(j))
                if d > best:
                    h, best = i, d
            keys.append(h)
            m, c, j = m + 1, 0, h
        elif c > C:
            keys.append(j)
            m, c = m + 1, 0
    if keys[-1] != J:
        keys.append(J)
    return [k - 1 for k in keys]


def straight():
    return [[0.05 * i, 0.0, 1.0] for i in range(100)]


def l_shape():
    pts = [[0.1 * i, 0.0, 1.0] for i in range(40)]
    pts += [[3.9, 0.1 * i, 1.0] for i in range(1, 40)]
    return pts


def sinusoid():
    return [[0.05 * i, math.sin(0.05 * i), 1.0] for i in range(200)]


def write(name, pts, out):
    with open(os.path.join(out, f"{name}_path.txt"), "w") as f:
        f.write("# t x y z vx vy vz ax ay az\n")
        for i, q in enumerate(pts):
            f.write(f"{0.1 * i!r} {q[0]!r} {q[1]!r} {q[2]!r} 0 0 0 0 0 0\n")
    with open(os.path.join(out, f"{name}_keys.txt"), "w") as f:
        for k in select(pts):
            f.write(f"{k}\n")


if __name__ == "__main__":
    here = os.path.dirname(os.path.abspath(__file__))
    for name, gen in [("straight", straight), ("l_shape", l_shape), ("sinusoid", sinusoid)]:
        write(name, gen(), here)
