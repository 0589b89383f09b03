#!/usr/bin/env python3
"""Writes the bundled scene files into scenes/.

    python3 tools/make_scenes.py [outdir]
"""
import itertools
import json
import math
import sys
from pathlib import Path


def unit(v):
    n = math.sqrt(sum(c * c for c in v))
    return [c / n for c in v]


def scale(v, s):
    return [c * s for c in v]


def add(a, b):
    return [x + y for x, y in zip(a, b)]


def sub(a, b):
    return [x - y for x, y in zip(a, b)]


def dot(a, b):
    return sum(x * y for x, y in zip(a, b))


def norm(v):
    return math.sqrt(dot(v, v))


def dist_point_segment(x, a, b):
    d = sub(b, a)
    t = max(0.0, min(1.0, dot(sub(x, a), d) / dot(d, d)))
    return norm(sub(x, add(a, scale(d, t))))


def clearance(x, obstacles, r0):
    """Euclidean distance from x to the nearest obstacle surface (or the wall)."""
    best = r0 - norm(x)
    for ob in obstacles:
        t = ob["type"]
        if t in ("sphere", "ball_joint"):
            best = min(best, norm(sub(x, ob["center"])) - ob["radius"])
        elif t == "capped_cylinder":
            best = min(best, dist_point_segment(x, ob["p1"], ob["p2"]) - ob["radius"])
        elif t == "full_cylinder":
            p, v = ob["point"], unit(ob["direction"])
            d = sub(x, p)
            best = min(best, norm(sub(d, scale(v, dot(d, v)))) - ob["radius"])
        elif t == "merged":
            best = min(best, clearance(x, ob["members"], math.inf))
    return best


def fibonacci_sphere(n, radius, twist=0.0):
    golden = math.pi * (3.0 - math.sqrt(5.0))
    pts = []
    for i in range(n):
        z = 1.0 - 2.0 * (i + 0.5) / n
        rho = math.sqrt(1.0 - z * z)
        a = golden * i + twist
        pts.append([radius * rho * math.cos(a), radius * rho * math.sin(a), radius * z])
    return pts


def boundary_starts(n, radius, obstacles, r0, min_clear):
    """n points on a sphere of `radius`, rotating the lattice until all are clear."""
    for step in range(200):
        pts = fibonacci_sphere(n, radius, twist=0.01 * step)
        if all(clearance(p, obstacles, r0) >= min_clear for p in pts):
            return [[round(c, 12) for c in p] for p in pts]
    raise RuntimeError("could not place start points")


def scene(name, r0, target, k, obstacles, starts, potential="psi", c=0.6, sim=None):
    out = {
        "version": 1,
        "name": name,
        "outer_radius": r0,
        "target": target,
        "potential": potential,
        "k": k,
        "damping_c": c,
    }
    if sim:
        out["sim"] = sim
    out["obstacles"] = obstacles
    out["starts"] = starts
    return out


def sphere(c, r):
    return {"type": "sphere", "center": c, "radius": r}


def capped(p1, p2, r):
    return {"type": "capped_cylinder", "p1": p1, "p2": p2, "radius": r}


def full(p, d, r):
    return {"type": "full_cylinder", "point": p, "direction": d, "radius": r}


TRUSS_R0 = 10.0
TRUSS_HALF = 3.0
TRUSS_ROD = 0.2
TRUSS_JOINT = 0.8


def truss_obstacles(r0=TRUSS_R0, a=TRUSS_HALF, rod=TRUSS_ROD, joint=TRUSS_JOINT):
    """Cube frame around the origin: 12 edges, 6 face braces, 8 wall anchors,
    8 ball joints and 2 free spheres (36 obstacles)."""
    corners = [list(c) for c in itertools.product((-a, a), repeat=3)]
    rods = []
    for i, j in itertools.combinations(range(8), 2):
        diff = [abs(x - y) for x, y in zip(corners[i], corners[j])]
        if sorted(diff) == [0.0, 0.0, 2 * a]:
            rods.append((i, j))
    # One diagonal per face, alternating so every corner carries at most two braces.
    braces = []
    for axis in range(3):
        for side in (-a, a):
            face = [i for i, c in enumerate(corners) if c[axis] == side]
            pairs = [(i, j) for i, j in itertools.combinations(face, 2)
                     if sum(1 for x, y in zip(corners[i], corners[j]) if x != y) == 2]
            pick = pairs[0] if (axis + (side > 0)) % 2 == 0 else pairs[1]
            braces.append(pick)
    obstacles = []
    touching = {i: [] for i in range(8)}
    for i, j in rods + braces:
        touching[i].append(len(obstacles))
        touching[j].append(len(obstacles))
        obstacles.append(capped(corners[i], corners[j], rod))
    for i, c in enumerate(corners):
        touching[i].append(len(obstacles))
        obstacles.append(capped(c, scale(unit(c), r0 + 1.0), rod))
    for i, c in enumerate(corners):
        obstacles.append({"type": "ball_joint", "center": c, "radius": joint, "members": touching[i]})
    obstacles.append(sphere([0.0, 0.0, 0.44 * r0], 0.1 * r0))
    obstacles.append(sphere([-0.44 * r0, 0.08 * r0, 0.0], 0.1 * r0))
    return obstacles


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "scenes"
    out.mkdir(parents=True, exist_ok=True)
    scenes = {}

    r0 = TRUSS_R0
    truss = truss_obstacles()
    assert len(truss) == 36
    starts = boundary_starts(100, 0.9 * r0, truss, r0, 0.4)
    long_run = {"t_max": 900.0}
    scenes["truss"] = scene("truss", r0, [0.0, 0.0, 0.0], 40, truss, starts, sim=long_run)
    scenes["truss_k10"] = scene("truss_k10", r0, [0.0, 0.0, 0.0], 10, truss, starts, sim=long_run)

    merged_members = []
    for ob in truss:
        if ob["type"] == "ball_joint":
            merged_members.append(sphere(ob["center"], ob["radius"]))
        else:
            merged_members.append(ob)
    scenes["truss_merged_k10"] = scene("truss_merged_k10", r0, [0.0, 0.0, 0.0], 10,
                                       [{"type": "merged", "p": 2.0, "members": merged_members}], starts,
                                       sim=long_run)

    # Four half-cylinders meeting at the origin at the tetrahedral angle.
    tetra_dirs = [unit(d) for d in ([1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1])]
    tetra = [capped([0.0, 0.0, 0.0], scale(d, r0 + 1.0), 0.3) for d in tetra_dirs]
    scenes["tetra"] = scene("tetra", r0, [1.5, 0.0, 0.0], 5, tetra,
                            boundary_starts(100, 0.9 * r0, tetra, r0, 0.2), sim=long_run)

    tripod = [full([0.0, 0.0, 0.0], d, 0.3) for d in ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0])]
    scenes["tripod"] = scene("tripod", r0, [1.5, 0.0, 1.5], 5, tripod,
                             boundary_starts(100, 0.9 * r0, tripod, r0, 0.2), sim=long_run)

    # Small room, few obstacles: phi's flat plateau against psi.
    plateau = [sphere([0.6, 0.5, 0.0], 0.2), sphere([-0.5, 0.6, 0.2], 0.2),
               sphere([0.0, -0.6, -0.4], 0.2), sphere([-0.4, -0.3, 0.7], 0.15)]
    scenes["plateau"] = scene("plateau", 1.5, [0.0, 0.0, 0.0], 40, plateau,
                              boundary_starts(25, 1.2, plateau, 1.5, 0.1))

    scenes["empty"] = scene("empty", 5.0, [0.0, 0.0, 0.0], 2, [],
                            boundary_starts(10, 4.0, [], 5.0, 0.1))
    scenes["two_spheres"] = scene("two_spheres", 5.0, [0.0, 0.0, 0.0], 4,
                                  [sphere([2.0, 0.0, 0.0], 0.8), sphere([-1.5, 1.5, 0.0], 0.6)],
                                  [[4.0, 0.3, 0.0], [-3.5, 2.5, 0.5]])
    scenes["sphere_between"] = scene("sphere_between", 5.0, [0.0, 0.0, 0.0], 3,
                                     [sphere([2.5, 0.0, 0.0], 1.0)], [[4.2, 0.05, 0.0]])
    scenes["tangent_spheres"] = scene("tangent_spheres", 5.0, [0.0, 0.0, -3.0], 4,
                                      [sphere([-1.0, 0.0, 0.0], 1.0), sphere([1.0, 0.0, 0.0], 1.0)], [])
    scenes["triple_overlap"] = scene("triple_overlap", 5.0, [0.0, 0.0, -3.0], 4,
                                     [sphere([0.0, 0.0, 0.0], 1.0), sphere([1.0, 0.0, 0.0], 1.0),
                                      sphere([0.5, math.sqrt(3) / 2, 0.0], 1.0)], [])
    scenes["close_cylinders"] = scene("close_cylinders", 5.0, [0.0, 0.0, -3.0], 4,
                                      [capped([-2.0, 0.0, 0.0], [2.0, 0.0, 0.0], 0.2),
                                       capped([-2.0, 0.0, 0.7], [2.0, 0.0, 0.7], 0.2)],
                                      [[0.0, 3.0, 0.3]])

    for name, sc in scenes.items():
        path = out / f"{name}.json"
        path.write_text(json.dumps(sc, indent=2) + "\n")
        print(path)


if __name__ == "__main__":
    main()
