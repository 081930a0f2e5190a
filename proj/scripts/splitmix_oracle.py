"""Reference values for the counter-based generator and projection tables.

Pure Python, written from the algorithm description rather than the C++
source; the unit tests pin the numbers printed here.
"""

M64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & M64
    return z ^ (z >> 31)


class Ctr:
    def __init__(self, seed: int, stream: int):
        self.key = mix(seed ^ mix(stream + 1))
        self.i = 0

    def next(self) -> int:
        self.i += 1
        return mix((self.key + self.i * GOLDEN) & M64)

    def index(self, n: int) -> int:
        threshold = ((1 << 64) - n) % n
        while True:
            r = self.next()
            if r >= threshold:
                return r % n


def classic_splitmix(seed: int, count: int) -> list[int]:
    out, s = [], seed
    for _ in range(count):
        s = (s + GOLDEN) & M64
        out.append(mix(s))
    return out


if __name__ == "__main__":
    print("classic splitmix64(1234567):", classic_splitmix(1234567, 3))
    g = Ctr(42, 0x200)
    print("ctr(42, 0x200) first 4:", [g.next() for _ in range(4)])
    t = Ctr(7, 0x201)
    print("projection(seed=7, in=40, n=4, out=8, stream=0x201):", [t.index(40) for _ in range(32)])
    t = Ctr(2018, 0x200)
    print("projection(seed=2018, in=3, n=4, out=6, stream=0x200):", [t.index(3) for _ in range(24)])
