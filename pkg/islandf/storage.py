'''Implement persistent storage of run artifacts.'''

import datetime
import json
import pathlib
import shutil

from typing import List
from typing import Optional

from . import __version__
from . import errors

MANIFEST = 'manifest.json'

SlotId = int


def _slot_id_to_prefix(idx: SlotId) -> str:
    return f'{idx:03}'


def write_json(path, obj) -> None:
    '''Writes obj as indented JSON with sorted keys, so that equal objects
    give byte-identical files.'''
    path = pathlib.Path(path)
    with path.open('w', encoding='utf-8') as fout:
        json.dump(obj, fout, indent=2, sort_keys=True, allow_nan=True)
        fout.write('\n')


def read_json(path):
    '''Reads a JSON file written by write_json().'''
    path = pathlib.Path(path)
    try:
        with path.open(encoding='utf-8') as fin:
            return json.load(fin)
    except json.JSONDecodeError as ex:
        raise errors.InvalidInput(f'{path}: {ex}') from ex


class Store:
    '''Implement storage of runs into "slots" that are just numbered
    directories on the disk, named like `007-sweep`. This class keeps
    track of a "current" slot, which is updated when slots are created,
    loaded and deleted.

    - Runs are always saved into a new slot, and this new slot becomes
      the current one.
    - Only current slot can be deleted, and there is no current slot
      anymore after the delete operation.
    - Load operations make the loaded slot the current one.
    '''
    def _scan(self):
        self._dirs = sorted(
            d for d in self._base_dir.glob('[0-9][0-9][0-9]-*')
            if d.is_dir()) if self._base_dir.exists() else []
        self._slot_ids = [int(d.name[:3]) for d in self._dirs]
        assert len(self._dirs) == len(self._slot_ids)
        # Slots can be deleted, so the next slot id is one past the
        # largest one in use, or 0 for an empty store.
        if len(self._slot_ids) <= 0:
            self._next_slot_id = 0
        else:
            self._next_slot_id = max(self._slot_ids) + 1

    def __init__(self, base_dir):
        self._base_dir = pathlib.Path(base_dir)
        self._dirs: List[pathlib.Path] = []
        self._slot_ids: List[SlotId] = []
        self._cur_idx = -1
        self._scan()

    @property
    def base_dir(self) -> pathlib.Path:
        '''Directory holding the slots.'''
        return self._base_dir

    def slot_ids(self) -> List[SlotId]:
        '''Returns the ids of all slots, in increasing order.'''
        return list(self._slot_ids)

    def destroy(self) -> None:
        '''Destroy all slots and data in storage'''
        for path in self._dirs:
            shutil.rmtree(path)
        if self._base_dir.exists() and not any(self._base_dir.iterdir()):
            self._base_dir.rmdir()
        self._scan()
        self._cur_idx = -1

    def create(self, command: str, config: dict) -> pathlib.Path:
        '''Creates a new slot for a run of the given command and writes its
        manifest. Returns the slot directory.'''
        saved = self._next_slot_id
        path = self._base_dir / f'{_slot_id_to_prefix(saved)}-{command}'
        path.mkdir(parents=True, exist_ok=False)
        write_json(path / MANIFEST, {
            'command': command,
            'config': config,
            'version': __version__,
            'created': datetime.datetime.now(datetime.timezone.utc)
            .isoformat(timespec='seconds'),
        })
        self._scan()
        # The new slot has the largest id, hence the last index.
        self._cur_idx = len(self._dirs) - 1
        assert self._slot_ids[self._cur_idx] == saved
        return path

    def current(self) -> Optional[pathlib.Path]:
        '''Returns the directory of the current slot, if any.'''
        if self._cur_idx < 0:
            return None
        return self._dirs[self._cur_idx]

    def delete(self) -> Optional[SlotId]:
        '''Deletes the current slot'''
        index_to_delete = self._cur_idx
        if index_to_delete < 0:
            return None
        slot_id = self._slot_ids[index_to_delete]
        shutil.rmtree(self._dirs[index_to_delete])
        self._scan()
        self._cur_idx = -1
        return slot_id

    def can_load(self) -> bool:
        '''Returns whether we have anything to load'''
        return len(self._dirs) > 0

    def load(self, goto_next: bool):
        '''Loads the manifest of the next or previous slot and returns it
        with the slot id.'''
        count = len(self._dirs)
        assert count > 0
        inc = 1 if goto_next else -1
        if self._cur_idx < 0:
            self._cur_idx = count - 1 if goto_next else 0
        self._cur_idx = (self._cur_idx + inc) % count
        path = self._dirs[self._cur_idx]
        return read_json(path / MANIFEST), self._slot_ids[self._cur_idx]
