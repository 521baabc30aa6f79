from __future__ import absolute_import


def output_csv(data, path, config=None):
    """Writes a :class:`pandas.DataFrame` as CSV, or TSV for ``.tsv`` paths"""
    sep = '\t' if str(path).endswith('.tsv') else ','
    data.to_csv(path, sep=sep, index=False, lineterminator='\n')


def output_text(data, path, config=None):
    """Writes pre-rendered text (JSONL, TSV) unchanged"""
    with open(path, 'w', encoding='utf-8', newline='\n') as fp:
        fp.write(data)
