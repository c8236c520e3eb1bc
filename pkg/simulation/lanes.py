"""
Per-lane ordering of vehicles for fast leader/follower lookups
"""

from bisect import bisect_left, bisect_right, insort
from collections import defaultdict


class LaneIndex:
    """
    Vehicles sorted by (front position, id) on every lane.

    The index can be edited with ``move`` so a batch of lane changes can be
    checked one after another before any of them is applied to the world.
    """

    def __init__(self, vehicles):
        self._lanes = defaultdict(list)
        self._lane_of = {}
        self._pos_of = {}
        for vehicle in vehicles:
            self._lanes[vehicle.lane].append((vehicle.longitudinal_pos, vehicle.id))
            self._lane_of[vehicle.id] = vehicle.lane
            self._pos_of[vehicle.id] = vehicle.longitudinal_pos
        for entries in self._lanes.values():
            entries.sort()

    def lane_of(self, vehicle_id):
        return self._lane_of[vehicle_id]

    def vehicles_on(self, lane):
        """Vehicle ids on a lane, upstream first"""
        return [vid for _, vid in self._lanes.get(lane, [])]

    def leader(self, lane, pos, vehicle_id=""):
        """Nearest vehicle on the lane ahead of (pos, vehicle_id), or None"""
        entries = self._lanes.get(lane)
        if not entries:
            return None
        i = bisect_right(entries, (pos, vehicle_id))
        return entries[i][1] if i < len(entries) else None

    def follower(self, lane, pos, vehicle_id=""):
        """Nearest vehicle on the lane behind (pos, vehicle_id), or None"""
        entries = self._lanes.get(lane)
        if not entries:
            return None
        i = bisect_left(entries, (pos, vehicle_id))
        return entries[i - 1][1] if i > 0 else None

    def first_at_or_after(self, lane, pos):
        entries = self._lanes.get(lane)
        if not entries:
            return None
        i = bisect_left(entries, (pos, ""))
        return entries[i][1] if i < len(entries) else None

    def move(self, vehicle_id, new_lane):
        old_lane = self._lane_of[vehicle_id]
        key = (self._pos_of[vehicle_id], vehicle_id)
        entries = self._lanes[old_lane]
        entries.pop(bisect_left(entries, key))
        insort(self._lanes[new_lane], key)
        self._lane_of[vehicle_id] = new_lane

    def add(self, vehicle):
        insort(self._lanes[vehicle.lane], (vehicle.longitudinal_pos, vehicle.id))
        self._lane_of[vehicle.id] = vehicle.lane
        self._pos_of[vehicle.id] = vehicle.longitudinal_pos
