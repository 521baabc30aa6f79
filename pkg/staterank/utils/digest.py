import hashlib
import json

__all__ = "file_digest", "data_digest"

CHUNK_SIZE = 1 << 16


def file_digest(path):
    sha = hashlib.sha256()
    with open(path, 'rb') as fp:
        for chunk in iter(lambda: fp.read(CHUNK_SIZE), b''):
            sha.update(chunk)
    return sha.hexdigest()


def data_digest(data):
    # canonical form: sorted keys, no whitespace
    dumped = json.dumps(data, sort_keys=True, separators=(',', ':'), default=str)
    return hashlib.sha256(dumped.encode('utf-8')).hexdigest()
