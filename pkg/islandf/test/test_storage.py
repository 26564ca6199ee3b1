'''Unit tests for storage'''

import pytest

from .. import __version__
from .. import errors
from .. import storage


def test_store(tmp_path):
    '''Test store'''
    store = storage.Store(tmp_path / 'runs')
    store.destroy()
    assert not store.can_load()
    assert store.current() is None

    # Check we can create a slot and then load its manifest
    path = store.create('solve', {'volume': 10.0})
    assert path.name == '000-solve'
    assert store.current() == path
    assert store.can_load()
    manifest, slot_id = store.load(False)
    assert slot_id == 0
    assert manifest['command'] == 'solve'
    assert manifest['config'] == {'volume': 10.0}
    assert manifest['version'] == __version__

    # Check we can delete
    assert store.delete() == 0
    # Check we cannot delete when we have no current slot
    assert store.delete() is None

    # Ids restart after the largest slot still in use
    store.create('sweep', {})
    path = store.create('limit', {})
    assert path.name == '001-limit'
    assert store.slot_ids() == [0, 1]

    # Create a brand new store and check we can load
    store = storage.Store(tmp_path / 'runs')
    assert store.can_load()
    manifest, slot_id = store.load(True)
    assert slot_id == 0
    assert manifest['command'] == 'sweep'

    # Check destroying
    store.destroy()
    assert not (tmp_path / 'runs').exists()


def test_json(tmp_path):
    '''Test JSON helpers write deterministic files'''
    first = tmp_path / 'a.json'
    second = tmp_path / 'b.json'
    storage.write_json(first, {'b': 1, 'a': [1.5, 2]})
    storage.write_json(second, {'a': [1.5, 2], 'b': 1})
    assert first.read_bytes() == second.read_bytes()
    assert storage.read_json(first) == {'a': [1.5, 2], 'b': 1}
    bad = tmp_path / 'bad.json'
    bad.write_text('{')
    with pytest.raises(errors.InvalidInput):
        storage.read_json(bad)
