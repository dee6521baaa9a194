from inventory.util import clamp


class Item:
    def __init__(self, name, price, qty=1):
        self.name = name
        self.price = price
        self.qty = clamp(qty, 0, 1000)

    def total(self):
        return self.price * self.qty


def make_item(name, price):
    return Item(name, price)
