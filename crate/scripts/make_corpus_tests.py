#!/usr/bin/env python3
"""Regenerate corpus/tests/*.jsonl.

Expected values come from the reference implementations below, written
independently of the subject programs and of the Rust interpreter.
"""
import json
import os
import sys


def jdiv(a, b):
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def jrem(a, b):
    return a - jdiv(a, b) * b


def fizzbuzz(n):
    if jrem(n, 15) == 0:
        return 15
    if jrem(n, 3) == 0:
        return 3
    if jrem(n, 5) == 0:
        return 5
    return 0


def triangle(a, b, c):
    if a + b <= c or a + c <= b or b + c <= a:
        return 0
    if a == b == c:
        return 3
    if a == b or b == c or a == c:
        return 2
    return 1


def has_dup(a):
    return len(set(a)) != len(a)


SUITES = {
    "swap": ("swapEncode", lambda x, y: y * 10000 + x,
             [(1, 2), (0, 0), (-5, 7), (999, -999), (12, 34), (-1, -1), (500, 3), (3, 500),
              (-999, 999), (42, 0), (0, 42), (7, -7), (100, 200), (-300, -400), (1, 0)]),
    "add": ("add", lambda a, b: a + b,
            [(0, 0), (1, 2), (-1, 1), (1000000, 1000000), (-1000000, -1000000), (5, -9), (123, 456),
             (-7, -8), (999999, 1), (0, -3), (10, 0), (-1000000, 1000000), (31, 11), (2, 2), (-50, 25)]),
    "midpoint": ("midpoint", lambda lo, hi: lo + jdiv(hi - lo, 2),
                 [(0, 0), (0, 1), (0, 10), (3, 7), (4, 9), (10, 10), (1, 100), (7, 8), (0, 2147483647),
                  (50, 51), (2, 3), (6, 20), (99, 1000), (1000, 1001), (5, 15)]),
    "sum_first_last": ("sumFirstLast", lambda a: a[0] + a[-1],
                       [([1],), ([1, 2],), ([5, 0, -5],), ([-3, 4, 9, 2],), ([0],), ([7, 7, 7],),
                        ([10, -10],), ([1, 2, 3, 4, 5],), ([-1],), ([100, 3, 200],), ([2, 9],),
                        ([0, 0, 0, 1],), ([-8, 5],), ([4, 6, 8],), ([12, 1, 1, 12],)]),
    "fizzbuzz": ("fizzBuzz", fizzbuzz,
                 [(3,), (5,), (15,), (7,), (0,), (30,), (9,), (10,), (1,), (-3,), (-5,), (-15,), (45,),
                  (22,), (25,)]),
    "max2": ("max", max, [(1, 2), (2, 1), (3, 3), (-1, -2), (-5, 5), (0, 0), (100, -100), (7, 8), (-9, -9),
                          (2147483647, 0), (0, -2147483648), (4, 4), (12, 13), (-20, -19), (6, 1)]),
    "abs": ("abs", abs, [(0,), (1,), (-1,), (5,), (-5,), (2147483647,), (-2147483647,), (100,), (-100,),
                         (42,), (-42,), (7,), (-8,), (3,), (-3,)]),
    "max3": ("max3", lambda x, y, z: max(x, y, z),
             [(1, 2, 3), (3, 2, 1), (2, 3, 1), (1, 1, 1), (-1, -2, -3), (5, 5, 1), (1, 5, 5), (5, 1, 5),
              (0, -1, 1), (10, 20, 15), (-7, -3, -5), (9, 8, 9), (4, 6, 2), (2, 2, 3), (100, 0, 50)]),
    "sign": ("sign", lambda x: (x > 0) - (x < 0),
             [(0,), (1,), (-1,), (42,), (-42,), (2147483647,), (-2147483648,), (7,), (-7,), (100,),
              (-100,), (3,), (-3,), (12,), (-12,)]),
    "clamp": ("clamp", lambda x, lo, hi: min(max(x, lo), hi),
              [(5, 0, 10), (-5, 0, 10), (15, 0, 10), (0, 0, 10), (10, 0, 10), (3, 3, 3), (2, 3, 3),
               (4, 3, 3), (-20, -10, -5), (-7, -10, -5), (0, -10, -5), (50, 1, 100), (0, 1, 100),
               (101, 1, 100), (7, -1, 1)]),
    "leap_year": ("isLeap", lambda y: (y % 4 == 0 and y % 100 != 0) or y % 400 == 0,
                  [(2000,), (1900,), (2024,), (2023,), (1600,), (1700,), (4,), (1,), (400,), (100,),
                   (2100,), (1996,), (1999,), (2400,), (8,)]),
    "triangle": ("classify", triangle,
                 [(1, 1, 1), (3, 4, 5), (2, 2, 3), (1, 2, 3), (1, 1, 5), (5, 1, 1), (1, 5, 1), (2, 3, 2),
                  (3, 2, 2), (10, 10, 10), (4, 5, 6), (7, 7, 13), (1, 10, 12), (6, 6, 1), (9999, 9999, 1)]),
    "palindrome": ("isPalindrome", lambda s: s == s[::-1],
                   [("",), ("a",), ("aa",), ("ab",), ("aba",), ("abba",), ("abca",), ("racecar",),
                    ("abcba",), ("abcd",), ("xyzzyx",), ("xyzyx",), ("ba",), ("aab",), ("baab",)]),
    "linear_search": ("indexOf", lambda a, k: a.index(k) if k in a else -1,
                      [([], 1), ([1], 1), ([1], 2), ([1, 2, 3], 3), ([1, 2, 3], 1), ([1, 2, 3], 4),
                       ([5, 5, 5], 5), ([4, 8, 15, 16], 15), ([-1, -2], -2), ([0, 0, 1], 1),
                       ([9, 8, 7, 6], 0), ([2, 4], 4), ([7], -7), ([3, 1, 3], 3), ([10, 20, 30], 20)]),
    "array_max": ("max", max,
                  [([1],), ([1, 2],), ([2, 1],), ([3, 3],), ([-1, -5, -3],), ([0, 9, 4],), ([5, 4, 3, 2],),
                   ([1, 2, 3, 4],), ([7, -7, 7],), ([-10],), ([2, 8, 8, 1],), ([100, 50, 200, 150],),
                   ([0, 0, 0],), ([-3, -2],), ([6, 1, 9, 9, 2],)]),
    "all_positive": ("allPositive", lambda a: all(x > 0 for x in a),
                     [([],), ([1],), ([0],), ([-1],), ([1, 2, 3],), ([1, 0, 3],), ([5, 6, -7],), ([-1, 2],),
                      ([9, 9],), ([3, 1, 4, 1, 5],), ([2, -2, 2],), ([100],), ([1, 1, 0],), ([7, 8],),
                      ([0, 0],)]),
    "sum_to": ("sumTo", lambda n: n * (n + 1) // 2,
               [(0,), (1,), (2,), (3,), (4,), (5,), (10,), (7,), (100,), (1000,), (13,), (20,), (50,),
                (99,), (8,)]),
    "reverse_array": ("reverse", None,
                      [([],), ([1],), ([1, 2],), ([1, 2, 3],), ([4, 3, 2, 1],), ([5, 5],), ([0, -1, -2],),
                       ([9, 8, 7, 6, 5],), ([1, 1, 2],), ([-3],), ([7, 0],), ([2, 4, 6, 8],),
                       ([10, 20, 30, 40, 50, 60],), ([0],), ([3, 1],)]),
    "count_char": ("countChar", lambda s, c: s.count(chr(c)),
                   [("", 97), ("a", 97), ("b", 97), ("aaa", 97), ("abc", 98), ("abcabc", 99), ("hello", 108),
                    ("hello", 122), ("banana", 97), ("banana", 110), ("xyz", 120), ("zzz", 121), ("ab", 98),
                    ("mississippi", 115), ("q", 113)]),
    "is_sorted": ("isSorted", lambda a: all(a[i] <= a[i + 1] for i in range(len(a) - 1)),
                  [([],), ([1],), ([1, 2],), ([2, 1],), ([1, 1],), ([1, 2, 3],), ([1, 3, 2],), ([3, 2, 1],),
                   ([-5, 0, 5],), ([0, 0, -1],), ([1, 2, 2, 3],), ([4, 5, 1, 6],), ([7],), ([9, 10, 11, 12],),
                   ([2, 1, 3],)]),
    "int_square": ("square", lambda n: n * n,
                   [(0,), (1,), (2,), (3,), (4,), (5,), (6,), (7,), (8,), (9,), (10,), (12,), (15,), (20,),
                    (31,)]),
    "bubble_sort": ("sort", None,
                    [([],), ([1],), ([2, 1],), ([1, 2],), ([3, 1, 2],), ([5, 4, 3, 2, 1],), ([1, 1, 1],),
                     ([0, -1, 1],), ([9, 2, 7, 4],), ([2, 2, 1],), ([-3, 8, -3, 0],), ([6, 5],),
                     ([1, 3, 2, 4],), ([10, 9, 8, 7, 6, 5],), ([4, 1, 3, 1],)]),
    "has_duplicate": ("hasDuplicate", has_dup,
                      [([],), ([1],), ([1, 1],), ([1, 2],), ([1, 2, 1],), ([1, 2, 3],), ([3, 2, 3],),
                       ([5, 6, 7, 8],), ([5, 6, 7, 5],), ([0, 0, 1],), ([-1, 1],), ([2, 4, 6, 4],),
                       ([9, 9, 9],), ([1, 2, 3, 4, 5],), ([7, 3, 7],)]),
}


def main(root):
    out_dir = os.path.join(root, "tests")
    os.makedirs(out_dir, exist_ok=True)
    for pid, (method, ref, cases) in sorted(SUITES.items()):
        lines = []
        for args in cases:
            case = {"method": method, "args": list(args)}
            if ref is not None:
                case["expected"] = ref(*args)
            lines.append(json.dumps(case, separators=(", ", ": ")))
        with open(os.path.join(out_dir, pid + ".jsonl"), "w") as f:
            f.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "..", "corpus"))
