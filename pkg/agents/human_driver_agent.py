from agents.base_agent import BaseAgent, PolicyStep


class HumanDriverAgent(BaseAgent):
    """
    The baseline: IDM car following with gap-acceptance lane changes.

    It does not take over any vehicle; the episode loop leaves every vehicle
    to the simulator's human driver model and scores the same agents.
    """

    controls_vehicles = False

    def __init__(self, name="Human Driver"):
        super().__init__(name)

    def act(self, vehicle_ids, observations, world, rng):
        return PolicyStep(actions={})
