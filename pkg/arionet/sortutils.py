# arionet - self-supervised birdsong representation toolkit
# sortutils library
# Copyright(C) 2026 arionet contributors
#
# The natural ordering follows Dave Koelle's Alphanum Algorithm
# (http://www.DaveKoelle.com): digit runs compare by numeric value,
# everything else compares as text.
#
# Released under the MIT License - https://opensource.org/licenses/MIT
#

""" Natural ordering of species names and file names, so that 'sp2'
    sorts before 'sp10' when species ids are assigned.
"""

import re

_re_digits = re.compile(r'(\d+)')


def natural_key(label: str) -> tuple:
    """ Sort key splitting label into alternating text and number chunks.
        re.split on a capturing group always yields text at even positions
        and digit runs at odd positions, so keys of different labels are
        always comparable.

        label: str

        return: tuple of str and int chunks

        Usage
        -----
        >>> sorted(['z100.wav', 'z2.wav'], key=natural_key)
        ['z2.wav', 'z100.wav']
    """
    chunks = _re_digits.split(label)
    return tuple(int(c) if i % 2 else c for i, c in enumerate(chunks))


def sort_labels(labels) -> list:
    """ Unique labels in natural order

        labels: iterable of str

        return: list of str
    """
    return sorted(set(labels), key=natural_key)
