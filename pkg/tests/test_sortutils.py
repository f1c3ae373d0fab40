import unittest

from arionet.sortutils import natural_key, sort_labels


class TestSortUtils(unittest.TestCase):

    def test_natural_key(self):

        test_strings = ["sp10", "sp2", "sp1", "Turdus merula 12",
                        "Turdus merula 2", "rec100.wav", "rec020.wav",
                        "rec3.wav", "Alpha 2A-900", "Alpha 2A-8000",
                        "Alpha 2A", "Alpha 100", "Alpha 2"]

        test_strings.sort(key=natural_key)
        ans = ['Alpha 2', 'Alpha 2A', 'Alpha 2A-900', 'Alpha 2A-8000',
               'Alpha 100', 'Turdus merula 2', 'Turdus merula 12',
               'rec3.wav', 'rec020.wav', 'rec100.wav', 'sp1', 'sp2', 'sp10']
        self.assertEqual(test_strings, ans)

    def test_mixed_leading_digits(self):
        labels = ['10X', 'X10', '2X', 'X2']
        self.assertEqual(sorted(labels, key=natural_key),
                         ['2X', '10X', 'X2', 'X10'])

    def test_sort_labels(self):
        res = sort_labels(['sp3', 'sp12', 'sp3', 'sp1'])
        self.assertEqual(res, ['sp1', 'sp3', 'sp12'])


if __name__ == '__main__':
    unittest.main()
