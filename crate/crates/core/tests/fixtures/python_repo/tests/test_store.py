from inventory.models import Item
from inventory.pricing import discount
from inventory.store import Store


def test_store_value():
    store = Store()
    store.add(Item("pen", 2.0, 3))
    store.add(Item("cup", discount(10.0), 1))
    assert store.value() == 15.0
    assert store.find("cup").price == 9.0
