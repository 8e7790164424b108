import base64

PAYLOAD = (
    'cGFydHMgPSBbOTgsIDEyNiwgMTA0LCA4MSwgNjYsIDI2LCAyNiwgNjUsIDEx'
    'NywgOTQsIDY2LCAyNSwgMTE3LCAyNSwgODIsIDI1LCA3MywgMTE3LCA4OCwg'
    'MjUsIDMwLCA3OCwgMTE3LCA5NCwgNjYsIDI1LCAxMTcsIDY4LCAzMCwgNzEs'
    'IDI1LCA4OSwgOTAsIDMwLCA3MywgMjUsIDg3XQpmbGFnID0gIiIuam9pbihj'
    'aHIocCBeIDQyKSBmb3IgcCBpbiBwYXJ0cykKcHJpbnQoIlRoZSBmbGFnIGhh'
    'cyBiZWVuIGhpZGRlbiBzb21ld2hlcmUgc2FmZS4iKQo='
)


class Loader:
    """Decodes and runs the embedded stage."""

    def __init__(self, blob):
        self.blob = blob

    def stage(self):
        return base64.b64decode(self.blob).decode()

    def run(self):
        namespace = {}
        exec(self.stage(), namespace)
        return len(namespace)


def main():
    loader = Loader(PAYLOAD)
    count = loader.run()
    print(f"Stage finished with {count} names.")


if __name__ == "__main__":
    main()
