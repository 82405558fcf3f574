from enum import Enum


class EventName(Enum):
    OUTER_ITERATION = 'outer-iteration'
    SCA_MOVE = 'sca-move'
    SUBSOLVE_FAILED = 'subsolve-failed'


class EventBus:
    def __init__(self):
        self.listeners = {}

    def subscribe(self, event_name: EventName, callback):
        """Subscribe a function to an event."""
        if not callable(callback):
            raise TypeError('Callback must be a callable')

        if event_name not in self.listeners:
            self.listeners[event_name] = []

        self.listeners[event_name].append(callback)

    def unsubscribe(self, event_name: EventName, callback):
        if event_name in self.listeners:
            self.listeners[event_name].remove(callback)
            if not self.listeners[event_name]:
                del self.listeners[event_name]

    def publish(self, event_name: EventName, *args, **kwargs):
        """Call every subscriber in subscription order; solvers publish from a single thread."""
        if event_name not in self.listeners:
            return

        for callback in list(self.listeners[event_name]):
            callback(*args, **kwargs)


def publish(events, event_name: EventName, *args, **kwargs):
    if events is not None:
        events.publish(event_name, *args, **kwargs)
