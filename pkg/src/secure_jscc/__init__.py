"""Secure joint source-channel coding of images over simulated wiretap channels.

A legitimate encoder/decoder pair is trained adversarially against a roster
of eavesdropper classifiers: reconstruction quality is maximized while the
cross-entropy leakage of sensitive attributes is driven toward chance level.
"""

__version__ = "0.1.0"
