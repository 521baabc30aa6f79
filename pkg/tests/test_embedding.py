import datetime
import io
import math
import unittest

import numpy as np

from staterank.embedding import (Embedding, EmbeddingSet, dumps_embeddings, embed_days,
                                 hash_embed, l1_distance, load_embeddings, save_embeddings,
                                 triplet_accuracy)
from staterank.exceptions import EmbeddingFormatError
from staterank.preprocess import DayString
from staterank.triplet_gen import Triplet

DAY = datetime.date(2023, 8, 1)


def day_of(pid, offset, tokens):
    return DayString(pid, DAY + datetime.timedelta(days=offset), tuple(tokens))


def embedding(pid, offset, vector):
    return Embedding(pid, DAY + datetime.timedelta(days=offset), np.asarray(vector, dtype=float))


class LoadEmbeddingsTestCase(unittest.TestCase):

    def test_load(self):
        stream = io.StringIO('p1\t2023-08-01\t0.5\t-1\t2e-3\np2\t2023-08-01\t1\t1\t1\n')
        embeddings = load_embeddings(stream)
        self.assertEqual(len(embeddings), 2)
        self.assertEqual(embeddings.dimension, 3)
        np.testing.assert_array_equal(embeddings.vector(('p1', DAY)), [0.5, -1.0, 0.002])
        self.assertEqual(embeddings.keys(), [('p1', DAY), ('p2', DAY)])

    def test_ragged_row(self):
        stream = io.StringIO('p1\t2023-08-01\t0.5\t1\np2\t2023-08-01\t1\n')
        with self.assertRaises(EmbeddingFormatError) as ctx:
            load_embeddings(stream)
        self.assertIn('line 2', str(ctx.exception))

    def test_non_finite(self):
        with self.assertRaises(EmbeddingFormatError) as ctx:
            load_embeddings(io.StringIO('p1\t2023-08-01\tnan\t1\n'))
        self.assertIn('line 1', str(ctx.exception))

    def test_duplicate_key(self):
        stream = io.StringIO('p1\t2023-08-01\t0\t1\np1\t2023-08-01\t1\t0\n')
        with self.assertRaises(EmbeddingFormatError):
            load_embeddings(stream)

    def test_bad_date(self):
        with self.assertRaises(EmbeddingFormatError):
            load_embeddings(io.StringIO('p1\t2023-13-01\t0\t1\n'))

    def test_save_keeps_full_precision(self):
        records = [embedding('p1', 0, [0.1, 1 / 3.0]), embedding('p1', 1, [-2.5e-17, 7.0])]
        stream = io.StringIO()
        save_embeddings(EmbeddingSet(records), stream)
        self.assertEqual(stream.getvalue(), dumps_embeddings(EmbeddingSet(records)))
        stream.seek(0)
        loaded = load_embeddings(stream)
        np.testing.assert_array_equal(loaded.matrix(), EmbeddingSet(records).matrix())


class EmbeddingSetTestCase(unittest.TestCase):

    def test_dimension_mismatch(self):
        with self.assertRaises(EmbeddingFormatError):
            EmbeddingSet([embedding('p1', 0, [1, 2]), embedding('p1', 1, [1, 2, 3])])

    def test_read_only_matrix(self):
        embeddings = EmbeddingSet([embedding('p1', 0, [1, 2])])
        with self.assertRaises(ValueError):
            embeddings.matrix()[0, 0] = 5.0


class HashEmbedTestCase(unittest.TestCase):

    def test_identical_days_embed_identically(self):
        tokens = ['nowhere'] * 30 + ['kitchen'] * 12 + ['lounge'] * 30
        a = hash_embed(day_of('p1', 0, tokens))
        b = hash_embed(day_of('p2', 5, tokens))
        self.assertEqual(l1_distance(a.vector, b.vector), 0.0)

    def test_unit_norm_and_dimension(self):
        tokens = ['kitchen', 'lounge'] * 36
        vector = hash_embed(day_of('p1', 0, tokens), d=64).vector
        self.assertEqual(vector.shape, (64,))
        self.assertAlmostEqual(float(np.linalg.norm(vector)), 1.0, places=12)

    def test_opposite_days_are_far_apart(self):
        nowhere = hash_embed(day_of('p1', 0, ['nowhere'] * 72), d=384, seed=0).vector
        bed = hash_embed(day_of('p1', 1, ['bed'] * 72), d=384, seed=0).vector
        self.assertLess(float(nowhere @ bed), 0.5)

    def test_random_days_have_unit_norm(self):
        rng = np.random.default_rng(4)
        tokens = ['nowhere', 'bed', 'kitchen', 'lounge', 'hallway', 'bathroom']
        for i in range(300):
            day = day_of('p1', i, [tokens[int(t)] for t in rng.integers(len(tokens), size=72)])
            d = int(rng.choice([16, 64, 384]))
            vector = hash_embed(day, d=d, seed=i).vector
            self.assertAlmostEqual(float(np.linalg.norm(vector)), 1.0, places=12)

    def test_deterministic_and_seeded(self):
        day = day_of('p1', 0, ['kitchen'] * 36 + ['bed'] * 36)
        np.testing.assert_array_equal(hash_embed(day, seed=3).vector,
                                      hash_embed(day, seed=3).vector)
        self.assertFalse(np.array_equal(hash_embed(day, seed=3).vector,
                                        hash_embed(day, seed=4).vector))

    def test_similar_days_are_closer(self):
        base = ['bed'] * 21 + ['kitchen'] * 6 + ['lounge'] * 39 + ['bed'] * 6
        near = ['bed'] * 21 + ['kitchen'] * 5 + ['lounge'] * 40 + ['bed'] * 6
        far = ['bed'] * 30 + ['hallway'] * 20 + ['bathroom'] * 16 + ['bed'] * 6
        vectors = [hash_embed(day_of('p1', i, t)).vector for i, t in enumerate((base, near, far))]
        self.assertLess(l1_distance(vectors[0], vectors[1]), l1_distance(vectors[0], vectors[2]))

    def test_small_dimension(self):
        with self.assertRaises(EmbeddingFormatError):
            hash_embed(day_of('p1', 0, ['bed'] * 72), d=8)

    def test_embed_days(self):
        days = [day_of('p1', i, ['bed'] * 72) for i in range(3)]
        embeddings = embed_days(days, d=32)
        self.assertEqual(embeddings.matrix().shape, (3, 32))
        self.assertEqual(embeddings.keys(), [d.key for d in days])


class TripletAccuracyTestCase(unittest.TestCase):

    def setUp(self):
        self.embeddings = EmbeddingSet([embedding('p1', 0, [0, 0]),
                                        embedding('p1', 1, [0, 1]),
                                        embedding('p2', 0, [3, 0]),
                                        embedding('p2', 1, [0, 0.5])])
        self.keys = self.embeddings.keys()

    def test_perfect_separation(self):
        k = self.keys
        scores = triplet_accuracy(self.embeddings, [Triplet(k[0], k[1], k[2])], margin=1.0)
        self.assertEqual(scores['accuracy'], 1.0)
        # d(a, p) = 1, d(a, n) = 3
        self.assertEqual(scores['mean_loss'], 0.0)
        self.assertEqual(scores['n'], 1)

    def test_violations(self):
        k = self.keys
        triplets = [Triplet(k[0], k[1], k[2]), Triplet(k[0], k[1], k[3])]
        scores = triplet_accuracy(self.embeddings, triplets, margin=1.0)
        self.assertEqual(scores['accuracy'], 0.5)
        # second triplet: 1 - 0.5 + 1
        self.assertEqual(scores['mean_loss'], 0.75)

    def test_missing_key(self):
        triplet = Triplet(self.keys[0], self.keys[1], ('p9', DAY))
        with self.assertRaises(EmbeddingFormatError):
            triplet_accuracy(self.embeddings, [triplet])

    def test_no_triplets(self):
        scores = triplet_accuracy(self.embeddings, [])
        self.assertTrue(math.isnan(scores['accuracy']))
        self.assertEqual(scores['n'], 0)


if __name__ == '__main__':
    unittest.main()
