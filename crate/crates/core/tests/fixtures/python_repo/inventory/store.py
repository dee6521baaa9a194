from inventory.models import Item


class Store:
    def __init__(self):
        self.items = []

    def add(self, item):
        self.items.append(item)
        return len(self.items)

    def value(self):
        return sum(i.total() for i in self.items)

    def find(self, name):
        for i in self.items:
            if i.name == name:
                return i
        return None
