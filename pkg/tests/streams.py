"""Random stream generation shared by the detector tests and acceptance checks."""
import numpy as np

from bgcusum.binning import partition_from_pdf
from bgcusum.detector import DetectorConfig
from bgcusum.distributions import Gaussian, Laplace, Uniform, gaussian, laplace, mixture, sample

MODELS = [
    gaussian(),
    laplace(0.0, 0.7071),
    mixture([(0.6, Gaussian(1.0, 1.0)), (0.4, Gaussian(-1.0, 1.0))]),
    mixture([(1.0, Gaussian(0.0, 1.0))], atoms=[(-1.0, 0.25), (1.0, 0.25)]),
    mixture([(0.5, Uniform(-1.0, 1.0)), (0.5, Laplace(0.0, 1.0))], atoms=[(0.0, 0.1), (2.5, 0.05)]),
]

POST = [gaussian(1.0, 1.0), gaussian(0.0, 0.25), laplace(0.5, 1.0),
        mixture([(1.0, Gaussian(0.0, 1.0))], atoms=[(-1.0, 0.4), (1.0, 0.1)])]


def random_case(seed: int, max_len: int = 300):
    """A (stream, config, partition) triple with boundary and atom hits mixed in."""
    rng = np.random.default_rng([7, seed])
    f = MODELS[seed % len(MODELS)]
    n = int(rng.integers(1, 9))
    p = partition_from_pdf(f, n)
    r = float(rng.choice([0.25, 1.0, float(n), 3.7]))
    length = int(rng.integers(1, max_len + 1))
    change = int(rng.integers(0, length + 1))
    post = POST[int(rng.integers(len(POST)))]
    if post.atoms and not f.atoms:
        post = gaussian(1.5, 1.0)
    if f.atoms and post.atoms and set(post.thetas) - set(f.thetas):
        post = gaussian(1.5, 1.0)
    x = np.concatenate([sample(f, rng, change), sample(post, rng, length - change)])
    specials = np.concatenate([p.boundaries, p.atoms])
    if specials.size:
        hit = rng.random(length) < 0.15
        x[hit] = rng.choice(specials, size=int(hit.sum()))
    return x, DetectorConfig(n, r), p
